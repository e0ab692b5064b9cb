//! File formats: PNG rasters, depth sidecars, pose CSVs and JSONL.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tactdiff_core::control::{column_component, PoseLog, POSE_COLUMNS};
use tactdiff_core::dataset::{Manifest, ManifestMeta, SampleRecord};
use tactdiff_core::geometry::{ContactPose, PoseComponent};
use tactdiff_core::image::Image;
use tactdiff_core::render::{DepthMap, ObjectMask};
use tactdiff_core::Error as CoreError;

use crate::error::{CliError, Result};

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::format(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write(path, s.as_bytes())
}

fn encode_png<P: image::PixelWithColorType>(buf: &ImageBuffer<P, Vec<P::Subpixel>>) -> Vec<u8>
where
    [P::Subpixel]: image::EncodableLayout,
{
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

fn decode_png(path: &Path) -> Result<image::DynamicImage> {
    image::load_from_memory_with_format(&read(path)?, image::ImageFormat::Png).map_err(|e| CliError::format(path, e))
}

fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Single-channel image as 16-bit greyscale, `round(v · 65535)`.
pub fn write_gray16(path: &Path, img: &Image) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let buf = ImageBuffer::<Luma<u16>, _>::from_fn(w, h, |u, v| Luma([quantize(img.get(u as usize, v as usize, 0), 65535.0) as u16]));
    write(path, &encode_png(&buf))
}

/// Any greyscale PNG, normalized to [0, 1].
pub fn read_gray(path: &Path) -> Result<Image> {
    let g = decode_png(path)?.into_luma16();
    let (w, h) = g.dimensions();
    let data = g.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect();
    Ok(Image::from_vec(w as usize, h as usize, 1, data)?)
}

pub fn write_rgb8(path: &Path, img: &Image) -> Result<()> {
    if img.channels() != 3 {
        return Err(CliError::Domain(format!("{}: expected an RGB image", path.display())));
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let buf = ImageBuffer::<Rgb<u8>, _>::from_fn(w, h, |u, v| {
        Rgb(std::array::from_fn(|c| quantize(img.get(u as usize, v as usize, c), 255.0) as u8))
    });
    write(path, &encode_png(&buf))
}

pub fn read_rgb(path: &Path) -> Result<Image> {
    let rgb = decode_png(path)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Ok(Image::from_vec(w as usize, h as usize, 3, data)?)
}

/// Mask as 8-bit PNG with values {0, 255}.
pub fn write_mask(path: &Path, mask: &ObjectMask) -> Result<()> {
    let (w, h) = (mask.width() as u32, mask.height() as u32);
    let buf = ImageBuffer::<Luma<u8>, _>::from_fn(w, h, |u, v| Luma([if mask.get(u as usize, v as usize) { 255 } else { 0 }]));
    write(path, &encode_png(&buf))
}

pub fn read_mask(path: &Path) -> Result<ObjectMask> {
    let g = decode_png(path)?.into_luma8();
    let (w, h) = g.dimensions();
    Ok(ObjectMask::from_fn(w as usize, h as usize, |u, v| g.get_pixel(u as u32, v as u32)[0] >= 128))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSidecar {
    pub mm_per_pixel: f64,
    pub depth_range_mm: f64,
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Depth map as a 16-bit PNG plus a JSON sidecar with its scale.
pub fn write_depth(path: &Path, d: &DepthMap) -> Result<()> {
    write_gray16(path, &d.image)?;
    write_json(
        &sidecar_path(path),
        &DepthSidecar {
            mm_per_pixel: d.mm_per_pixel,
            depth_range_mm: d.depth_range_mm,
        },
    )
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let side: DepthSidecar = read_json(&sidecar_path(path))?;
    Ok(DepthMap {
        image: read_gray(path)?,
        mm_per_pixel: side.mm_per_pixel,
        depth_range_mm: side.depth_range_mm,
    })
}

/// One data row of a pose CSV before range validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRow {
    /// 1-based data row index.
    pub row: usize,
    pub frame: u32,
    pub pose: ContactPose,
}

/// Parse the columns `frame,x,y,z,yaw` in any order and reject duplicate
/// frames. Out-of-range values are not checked here.
pub fn parse_pose_rows(bytes: &[u8]) -> std::result::Result<Vec<PoseRow>, CoreError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr
        .headers()
        .map_err(|e| CoreError::UnparsableNumber {
            row: 0,
            column: "header".into(),
            text: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CoreError::MissingColumn(name.into()))
    };
    let frame_col = find(POSE_COLUMNS[0])?;
    let cols: Vec<(PoseComponent, usize)> = POSE_COLUMNS[1..]
        .iter()
        .map(|&name| Ok((column_component(name).expect("pose column"), find(name)?)))
        .collect::<std::result::Result<_, CoreError>>()?;
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CoreError::UnparsableNumber {
            row,
            column: String::new(),
            text: e.to_string(),
        })?;
        let field = |c: usize, name: &str| {
            let text = rec.get(c).unwrap_or("");
            (text, CoreError::UnparsableNumber {
                row,
                column: name.into(),
                text: text.into(),
            })
        };
        let (text, err) = field(frame_col, "frame");
        let frame: u32 = text.parse().map_err(|_| err)?;
        if !seen.insert(frame) {
            return Err(CoreError::DuplicateFrame { row, frame });
        }
        let mut v = [0.0; 4];
        for (k, &(comp, c)) in cols.iter().enumerate() {
            let (text, err) = field(c, comp.name());
            v[k] = text.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or(err)?;
        }
        out.push(PoseRow {
            row,
            frame,
            pose: ContactPose::new(v[0], v[1], v[2], v[3]),
        });
    }
    Ok(out)
}

/// Parse and strictly validate a pose log.
pub fn parse_pose_log(bytes: &[u8]) -> std::result::Result<PoseLog, CoreError> {
    PoseLog::from_rows(parse_pose_rows(bytes)?.into_iter().map(|r| (r.row, r.frame, r.pose)))
}

pub fn pose_csv(rows: &[(u32, ContactPose)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(POSE_COLUMNS).expect("in-memory CSV");
    for (frame, p) in rows {
        w.write_record([frame.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string(), p.yaw.to_string()])
            .expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

pub fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, &it).expect("serializable");
        out.push(b'\n');
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::format(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ManifestLine {
    Meta(ManifestMeta),
    Record(SampleRecord),
}

/// Manifest as JSONL: one metadata line, then one line per record. Paths
/// inside records are relative to the manifest's directory.
pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let lines = std::iter::once(ManifestLine::Meta(m.meta.clone())).chain(m.records.iter().cloned().map(ManifestLine::Record));
    write(path, &jsonl(lines))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mut meta = None;
    let mut records = Vec::new();
    for line in read_jsonl::<ManifestLine>(path)? {
        match line {
            ManifestLine::Meta(m) if meta.is_none() => meta = Some(m),
            ManifestLine::Meta(_) => return Err(CliError::format(path, "more than one metadata line")),
            ManifestLine::Record(r) => records.push(r),
        }
    }
    let meta = meta.ok_or_else(|| CliError::format(path, "missing metadata line"))?;
    Ok(Manifest { meta, records })
}

/// Directory that relative manifest paths are resolved against.
pub fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// `target` relative to `base`, with `/` separators.
pub fn relative(target: &Path, base: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let rel = pathdiff::diff_paths(abs(target), abs(base)).unwrap_or_else(|| target.to_path_buf());
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = Image::from_fn(5, 4, |u, v| (u * 4 + v) as f32 / 20.0);
        write_gray16(&p, &img).unwrap();
        let back = read_gray(&p).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn pose_csv_columns_any_order() {
        let rows = parse_pose_rows(b"yaw,frame,z,x,y\n89.9,0,-0.49,3.17,0.97\n").unwrap();
        assert_eq!(rows[0].frame, 0);
        assert_eq!(rows[0].pose, ContactPose::new(3.17, 0.97, -0.49, 89.9));
        assert!(parse_pose_log(b"frame,x,y,z,yaw\n").unwrap().is_empty());
        let e = parse_pose_log(b"frame,x,y,z,yaw\n0,0,0,0,95\n").unwrap_err();
        assert!(matches!(e, CoreError::PoseRowOutOfRange { row: 1, .. }), "{e}");
        let e = parse_pose_rows(b"frame,x,y,yaw\n0,0,0,0\n").unwrap_err();
        assert_eq!(e, CoreError::MissingColumn("z".into()));
        let e = parse_pose_rows(b"frame,x,y,z,yaw\n0,0,0,0,0\n1,a,0,0,0\n").unwrap_err();
        assert!(matches!(e, CoreError::UnparsableNumber { row: 2, .. }), "{e}");
        let e = parse_pose_log(b"frame,x,y,z,yaw\n3,0,0,0,0\n3,0,0,0,0\n").unwrap_err();
        assert_eq!(e, CoreError::DuplicateFrame { row: 2, frame: 3 });
    }

    #[test]
    fn relative_paths() {
        assert_eq!(relative(Path::new("/a/b/c.png"), Path::new("/a/d")), "../b/c.png");
        assert_eq!(relative(Path::new("/a/b/c.png"), Path::new("/a")), "b/c.png");
    }
}
