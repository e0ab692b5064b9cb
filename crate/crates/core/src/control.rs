//! Pose alignment of raw depth maps into control images.
//!
//! A raw depth map is rendered once per object at the canonical pose. Each
//! pose record then maps it, about the mask centroid, through translate →
//! scale → intensity modulation → yaw rotation, and the result is checked by
//! re-measuring its centroid.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{validate_pose, ContactPose, PoseComponent, ValidationMode};
use crate::image::Image;
use crate::math::{floor, sin_cos_deg, sqrt};
use crate::render::{
    extract_mask, mask_centroid, DepthMap, ObjectMask, DEFAULT_MASK_THRESHOLD, DEFAULT_MM_PER_PIXEL,
};

/// Alignment errors at or above this bound (px) reject a frame.
pub const MAX_ALIGNMENT_ERROR_PX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationParams {
    pub mm_per_pixel_x: f64,
    pub mm_per_pixel_y: f64,
    /// Target pixel of the zero pose; `None` means the frame centre.
    #[serde(default)]
    pub image_centre: Option<[f64; 2]>,
    pub z_intensity_gain: f64,
    pub z_scale_gain: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            mm_per_pixel_x: DEFAULT_MM_PER_PIXEL,
            mm_per_pixel_y: DEFAULT_MM_PER_PIXEL,
            image_centre: None,
            z_intensity_gain: 0.3,
            z_scale_gain: 0.1,
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let gain = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.mm_per_pixel_x) || !positive(self.mm_per_pixel_y) {
            return Err(Error::InvalidCalibration("mm_per_pixel must be positive"));
        }
        if !gain(self.z_intensity_gain) || !gain(self.z_scale_gain) {
            return Err(Error::InvalidCalibration("gains must be non-negative"));
        }
        if let Some(c) = self.image_centre {
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidCalibration("image centre must be finite"));
            }
        }
        Ok(())
    }

    pub fn centre(&self, width: usize, height: usize) -> [f64; 2] {
        self.image_centre
            .unwrap_or([(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0])
    }

    /// Pixel position the object centroid must land on for pose `p`.
    pub fn target(&self, p: &ContactPose, width: usize, height: usize) -> [f64; 2] {
        let [cx, cy] = self.centre(width, height);
        [cx + p.x / self.mm_per_pixel_x, cy + p.y / self.mm_per_pixel_y]
    }

    /// Short stable fingerprint (FNV-1a over the IEEE bit patterns).
    pub fn digest(&self) -> String {
        let centre = self.image_centre.unwrap_or([f64::NAN, f64::NAN]);
        let fields = [
            self.mm_per_pixel_x,
            self.mm_per_pixel_y,
            centre[0],
            centre[1],
            self.z_intensity_gain,
            self.z_scale_gain,
        ];
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for f in fields {
            for b in f.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub object_id: String,
    pub pose: ContactPose,
    pub calibration_digest: String,
}

/// Pose-aligned depth map fed to the control branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlImage {
    pub image: Image,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ApplyOptions {
    pub interpolation: Interpolation,
    /// Extra pixel offset added to the target (centroid-correction retry).
    pub correction: [f64; 2],
}

/// Map `d` into the control frame for pose `p` (see module docs).
pub fn apply_pose(
    d: &DepthMap,
    mask: &ObjectMask,
    p: &ContactPose,
    cal: &CalibrationParams,
) -> Result<ControlImage> {
    apply_pose_with(d, mask, p, cal, &ApplyOptions::default())
}

pub fn apply_pose_with(
    d: &DepthMap,
    mask: &ObjectMask,
    p: &ContactPose,
    cal: &CalibrationParams,
    opts: &ApplyOptions,
) -> Result<ControlImage> {
    cal.validate()?;
    let (w, h) = (d.width(), d.height());
    let (cu, cv) = mask_centroid(mask)?;
    let scale = 1.0 + cal.z_scale_gain * p.z;
    if !(scale > 0.0) {
        return Err(Error::DegenerateScale(scale));
    }
    let peak = d.image.max_value() as f64;
    let upper = if peak > 0.0 { 1.0 / peak } else { f64::INFINITY };
    let gain = (1.0 + cal.z_intensity_gain * p.z).clamp(0.0, upper);
    let [tu, tv] = cal.target(p, w, h);
    let (tu, tv) = (tu + opts.correction[0], tv + opts.correction[1]);
    let (sin, cos) = sin_cos_deg(p.yaw);
    let inv_scale = 1.0 / scale;

    let src = &d.image;
    let out = Image::from_fn(w, h, |u, v| {
        // inverse map: i = c + R(-θ)(o - t) / s
        let (du, dv) = (u as f64 - tu, v as f64 - tv);
        let iu = cu + (cos * du + sin * dv) * inv_scale;
        let iv = cv + (-sin * du + cos * dv) * inv_scale;
        let sample = match opts.interpolation {
            Interpolation::Bilinear => bilinear(src, iu, iv),
            Interpolation::Nearest => nearest(src, iu, iv),
        };
        (sample * gain) as f32
    });

    Ok(ControlImage {
        image: out,
        provenance: Provenance {
            object_id: String::new(),
            pose: *p,
            calibration_digest: cal.digest(),
        },
    })
}

fn texel(img: &Image, u: i64, v: i64) -> f64 {
    if u < 0 || v < 0 || u >= img.width() as i64 || v >= img.height() as i64 {
        0.0
    } else {
        img.get(u as usize, v as usize, 0) as f64
    }
}

fn bilinear(img: &Image, x: f64, y: f64) -> f64 {
    let (x0, y0) = (floor(x), floor(y));
    let (fx, fy) = (x - x0, y - y0);
    let (u, v) = (x0 as i64, y0 as i64);
    let top = texel(img, u, v) * (1.0 - fx) + if fx > 0.0 { texel(img, u + 1, v) * fx } else { 0.0 };
    if fy == 0.0 {
        return top;
    }
    let bottom = texel(img, u, v + 1) * (1.0 - fx)
        + if fx > 0.0 {
            texel(img, u + 1, v + 1) * fx
        } else {
            0.0
        };
    top * (1.0 - fy) + bottom * fy
}

fn nearest(img: &Image, x: f64, y: f64) -> f64 {
    texel(img, floor(x + 0.5) as i64, floor(y + 0.5) as i64)
}

/// Distance (px) between the realized centroid of `c` and the target of `p`.
pub fn alignment_error(c: &ControlImage, p: &ContactPose, cal: &CalibrationParams) -> Result<f64> {
    let (u, v) = realized_centroid(c)?;
    let [tu, tv] = cal.target(p, c.image.width(), c.image.height());
    Ok(sqrt((u - tu) * (u - tu) + (v - tv) * (v - tv)))
}

fn realized_centroid(c: &ControlImage) -> Result<(f64, f64)> {
    mask_centroid(&extract_mask(&c.image, DEFAULT_MASK_THRESHOLD))
}

/// Outcome of processing one pose record.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameOutcome {
    Accepted {
        control: ControlImage,
        alignment_error_px: f64,
        retried: bool,
    },
    Rejected {
        reason: String,
        alignment_error_px: Option<f64>,
    },
}

/// Apply pose, validate alignment, and retry once with the measured
/// centroid offset folded into the target before rejecting.
pub fn process_frame(
    d: &DepthMap,
    mask: &ObjectMask,
    object_id: &str,
    p: &ContactPose,
    cal: &CalibrationParams,
) -> FrameOutcome {
    let attempt = |opts: &ApplyOptions| -> Result<(ControlImage, f64)> {
        let mut c = apply_pose_with(d, mask, p, cal, opts)?;
        c.provenance.object_id = object_id.into();
        let err = alignment_error(&c, p, cal)?;
        Ok((c, err))
    };
    let reject = |e: Error| FrameOutcome::Rejected {
        reason: format!("{e}"),
        alignment_error_px: None,
    };
    if let Err(e) = validate_pose(*p, ValidationMode::Strict) {
        return reject(e);
    }
    let (first, err) = match attempt(&ApplyOptions::default()) {
        Ok(x) => x,
        Err(e) => return reject(e),
    };
    if err < MAX_ALIGNMENT_ERROR_PX {
        return FrameOutcome::Accepted {
            control: first,
            alignment_error_px: err,
            retried: false,
        };
    }
    let correction = match realized_centroid(&first) {
        Ok((u, v)) => {
            let [tu, tv] = cal.target(p, d.width(), d.height());
            [tu - u, tv - v]
        }
        Err(e) => return reject(e),
    };
    let opts = ApplyOptions {
        correction,
        ..ApplyOptions::default()
    };
    match attempt(&opts) {
        Ok((control, e2)) if e2 < MAX_ALIGNMENT_ERROR_PX => FrameOutcome::Accepted {
            control,
            alignment_error_px: e2,
            retried: true,
        },
        Ok((_, e2)) => FrameOutcome::Rejected {
            reason: format!("alignment error {e2:.2} px after centroid correction"),
            alignment_error_px: Some(e2),
        },
        Err(e) => reject(e),
    }
}

/// One validated pose-log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame: u32,
    pub pose: ContactPose,
}

/// Ordered, frame-unique sequence of strictly valid poses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseLog {
    pub records: Vec<PoseRecord>,
}

impl PoseLog {
    /// Validate raw rows (1-based data-row index, frame, pose); the first
    /// violation is returned.
    pub fn from_rows(rows: impl IntoIterator<Item = (usize, u32, ContactPose)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut records = Vec::new();
        for (row, frame, pose) in rows {
            if !seen.insert(frame) {
                return Err(Error::DuplicateFrame { row, frame });
            }
            check_row(row, &pose)?;
            records.push(PoseRecord { frame, pose });
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Strict range check reported against a pose-log row.
pub fn check_row(row: usize, pose: &ContactPose) -> Result<()> {
    match validate_pose(*pose, ValidationMode::Strict) {
        Ok(_) => Ok(()),
        Err(Error::PoseOutOfRange {
            component,
            value,
            min,
            max,
        }) => Err(Error::PoseRowOutOfRange {
            row,
            component,
            value,
            min,
            max,
        }),
        Err(e) => Err(e),
    }
}

/// Column names of the pose CSV, in canonical order.
pub const POSE_COLUMNS: [&str; 5] = ["frame", "x", "y", "z", "yaw"];

/// Pose component held by a CSV column other than `frame`.
pub fn column_component(name: &str) -> Option<PoseComponent> {
    PoseComponent::ALL.into_iter().find(|c| c.name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{cuboid, cylinder, pacman};
    use crate::render::{render_depth, OrthoCamera};

    fn fixture(mesh: &crate::geometry::TriangleMesh, res: usize, mpx: f64) -> (DepthMap, ObjectMask) {
        let cam = OrthoCamera::new(res, res, mpx, -1.0, 2.0);
        let d = render_depth(mesh, &cam).unwrap().depth;
        let m = extract_mask(&d.image, DEFAULT_MASK_THRESHOLD);
        (d, m)
    }

    fn cal(mpx: f64) -> CalibrationParams {
        CalibrationParams {
            mm_per_pixel_x: mpx,
            mm_per_pixel_y: mpx,
            ..CalibrationParams::default()
        }
    }

    #[test]
    fn identity_pose_is_identity() {
        // even pixel extents keep the centroid on the frame centre
        let (d, m) = fixture(&cuboid(4.0, 3.0, 1.0), 128, 0.1);
        let c = apply_pose(&d, &m, &ContactPose::ORIGIN, &cal(0.1)).unwrap();
        for (a, b) in c.image.data().iter().zip(d.image.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(alignment_error(&c, &ContactPose::ORIGIN, &cal(0.1)).unwrap() < 0.5);
    }

    #[test]
    fn translation_moves_centroid() {
        let (d, m) = fixture(&cylinder(3.0, 1.0, 64), 256, 0.1);
        let p = ContactPose::new(5.0, 0.0, 0.0, 0.0);
        let c = apply_pose(&d, &m, &p, &cal(0.1)).unwrap();
        let (u0, v0) = mask_centroid(&m).unwrap();
        let (u1, v1) = realized_centroid(&c).unwrap();
        assert!((u1 - u0 - 50.0).abs() < 0.5, "{u1} {u0}");
        assert!((v1 - v0).abs() < 0.5);
    }

    #[test]
    fn miscalibration_detected() {
        let (d, m) = fixture(&cylinder(3.0, 1.0, 64), 256, 0.1);
        let p = ContactPose::new(5.0, 0.0, 0.0, 0.0);
        let c = apply_pose(&d, &m, &p, &cal(0.1)).unwrap();
        let err = alignment_error(&c, &p, &cal(0.2)).unwrap();
        assert!((err - 25.0).abs() < 0.5, "{err}");
        assert!(err >= MAX_ALIGNMENT_ERROR_PX);
    }

    #[test]
    fn quarter_turns_compose() {
        let (d, m) = fixture(&cylinder(3.0, 1.0, 128), 128, 0.1);
        let cal = cal(0.1);
        let q = ContactPose::new(0.0, 0.0, 0.0, 90.0);
        let once = apply_pose(&d, &m, &q, &cal).unwrap();
        let once_d = DepthMap {
            image: once.image.clone(),
            ..d.clone()
        };
        let once_m = extract_mask(&once.image, DEFAULT_MASK_THRESHOLD);
        let twice = apply_pose(&once_d, &once_m, &q, &cal).unwrap();
        // 180° via brute-force point reflection about the centroid
        let (cu, cv) = mask_centroid(&m).unwrap();
        let [tu, tv] = cal.target(&ContactPose::ORIGIN, 128, 128);
        let half = Image::from_fn(128, 128, |u, v| {
            bilinear(&d.image, cu - (u as f64 - tu), cv - (v as f64 - tv)) as f32
        });
        for (a, b) in twice.image.data().iter().zip(half.data()) {
            assert!((a - b).abs() < 2.0 / 255.0);
        }
        let direct = apply_pose(&d, &m, &ContactPose::new(0.0, 0.0, 0.0, 180.0), &cal).unwrap();
        for (a, b) in twice.image.data().iter().zip(direct.image.data()) {
            assert!((a - b).abs() < 2.0 / 255.0);
        }
    }

    #[test]
    fn yaw_round_trip_preserves_mask() {
        let (d, m) = fixture(&cylinder(4.0, 1.0, 128), 256, 0.1);
        let cal = cal(0.1);
        // bilinear edge blur leaks past the 0.01 background threshold, so
        // mask-level identities are checked with nearest sampling
        {
            let opts = ApplyOptions {
                interpolation: Interpolation::Nearest,
                ..ApplyOptions::default()
            };
            let turn = |d: &DepthMap, yaw: f64| {
                let m = extract_mask(&d.image, DEFAULT_MASK_THRESHOLD);
                let p = ContactPose::new(0.0, 0.0, 0.0, yaw);
                let c = apply_pose_with(d, &m, &p, &cal, &opts).unwrap();
                DepthMap {
                    image: c.image,
                    ..d.clone()
                }
            };
            let back = turn(&turn(&d, 37.0), -37.0);
            let iou = extract_mask(&back.image, DEFAULT_MASK_THRESHOLD).iou(&m);
            assert!(iou > 0.99);
        }
    }

    #[test]
    fn rotation_is_counterclockwise() {
        // the pac-man mouth points along +x; a +90° yaw turns it to +y
        let (d, m) = fixture(&pacman(4.0, 1.0, 96), 128, 0.1);
        let c = apply_pose(&d, &m, &ContactPose::new(0.0, 0.0, 0.0, 90.0), &cal(0.1)).unwrap();
        assert_eq!(d.get(84, 64), 0.0);
        assert!(d.get(44, 64) > 0.0);
        assert_eq!(c.image.get(64, 84, 0), 0.0);
        assert!(c.image.get(64, 43, 0) > 0.0);
        assert!(c.image.get(84, 64, 0) > 0.0);
    }

    #[test]
    fn depth_scaling_and_modulation() {
        let (d, m) = fixture(&cylinder(3.0, 1.0, 64), 128, 0.1);
        let cal = cal(0.1);
        let area = |z: f64| {
            let c = apply_pose(&d, &m, &ContactPose::new(0.0, 0.0, z, 0.0), &cal).unwrap();
            let mask = extract_mask(&c.image, DEFAULT_MASK_THRESHOLD);
            let total: f64 = c.image.data().iter().map(|&x| x as f64).sum();
            (mask.area() as f64, total / mask.area() as f64)
        };
        let (a0, i0) = area(0.0);
        assert!((a0 - m.area() as f64).abs() / a0 < 0.01);
        let mut prev = f64::NEG_INFINITY;
        for k in -4..=4 {
            let (_, mean) = area(k as f64 * 0.25);
            assert!(mean >= prev - 1e-9);
            prev = mean;
        }
        let (a1, i1) = area(1.0);
        assert!(a1 > a0 && i1 > i0);
    }

    #[test]
    fn degenerate_scale_rejected() {
        let (d, m) = fixture(&cylinder(3.0, 1.0, 32), 64, 0.1);
        let bad = CalibrationParams {
            z_scale_gain: 2.0,
            ..cal(0.1)
        };
        let p = ContactPose::new(0.0, 0.0, -0.5, 0.0);
        assert_eq!(apply_pose(&d, &m, &p, &bad), Err(Error::DegenerateScale(0.0)));
        let empty = ObjectMask::from_fn(64, 64, |_, _| false);
        assert_eq!(apply_pose(&d, &empty, &p, &cal(0.1)), Err(Error::EmptyMask));
    }

    #[test]
    fn frame_outcomes() {
        let (d, m) = fixture(&cylinder(3.0, 1.0, 64), 256, 0.12);
        let cal = CalibrationParams::default();
        let ok = process_frame(&d, &m, "disc", &ContactPose::new(3.17, 0.97, -0.49, 89.9), &cal);
        match ok {
            FrameOutcome::Accepted {
                control,
                alignment_error_px,
                ..
            } => {
                assert!(alignment_error_px < MAX_ALIGNMENT_ERROR_PX);
                assert_eq!(control.provenance.object_id, "disc");
            }
            other => panic!("{other:?}"),
        }
        let bad = process_frame(&d, &m, "disc", &ContactPose::new(0.0, 0.0, 0.0, 95.0), &cal);
        assert!(matches!(bad, FrameOutcome::Rejected { .. }));
    }

    #[test]
    fn pose_log_validation() {
        let fig = ContactPose::new(3.17, 0.97, -0.49, 89.9);
        assert_eq!(PoseLog::from_rows([(1, 0, fig)]).unwrap().len(), 1);
        assert!(PoseLog::from_rows([]).unwrap().is_empty());
        let dup = PoseLog::from_rows([(1, 4, fig), (2, 4, fig)]);
        assert_eq!(dup, Err(Error::DuplicateFrame { row: 2, frame: 4 }));
        let yaw = PoseLog::from_rows([(1, 0, ContactPose::new(0.0, 0.0, 0.0, 95.0))]);
        assert!(matches!(
            yaw,
            Err(Error::PoseRowOutOfRange {
                row: 1,
                component: PoseComponent::Yaw,
                ..
            })
        ));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = CalibrationParams::default();
        assert_eq!(a.digest(), a.digest());
        assert_ne!(a.digest(), cal(0.2).digest());
        assert_eq!(a.digest().len(), 16);
    }
}
