//! Fixture export, prompt files and the synthetic target corpus.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tactdiff_core::control::CalibrationParams;
use tactdiff_core::dataset::fixtures::{fixture_mesh, sample_poses};
use tactdiff_core::dataset::{synth_targets, Manifest, Partition, SampleRecord, SynthStyleParams};
use tactdiff_core::geometry::{write_binary_stl, SensorModality};
use tactdiff_core::prompts::{make_prompt, PromptSchema, TemplateTable};

use crate::controlset::ControlRecord;
use crate::error::{CliError, Result};
use crate::exec::Pool;
use crate::io;

/// Files written by [`make_fixtures`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    /// `(object id, STL path, pose CSV path)`.
    pub objects: Vec<(String, PathBuf, PathBuf)>,
    pub calibration: PathBuf,
    pub templates: PathBuf,
    pub style: PathBuf,
}

/// Write each fixture as binary STL with an `n`-row pose log, plus default
/// calibration, template and style files.
pub fn make_fixtures(out: &Path, objects: &[&str], n: usize, seed: u64) -> Result<FixtureFiles> {
    let mut files = Vec::new();
    for &id in objects {
        let mesh = fixture_mesh(id).ok_or_else(|| CliError::usage(format!("unknown fixture `{id}`")))?;
        let stl = out.join("stl").join(format!("{id}.stl"));
        io::write(&stl, &write_binary_stl(&mesh))?;
        let rows: Vec<_> = sample_poses(seed, id, n).into_iter().enumerate().map(|(i, p)| (i as u32, p)).collect();
        let csv = out.join("poses").join(format!("{id}.csv"));
        io::write(&csv, &io::pose_csv(&rows))?;
        files.push((id.to_string(), stl, csv));
    }
    let calibration = out.join("calibration.json");
    io::write_json(&calibration, &CalibrationParams::default())?;
    let templates = out.join("templates.json");
    io::write_json(&templates, &TemplateTable::default())?;
    let style = out.join("style.json");
    io::write_json(&style, &SynthStyleParams::default())?;
    Ok(FixtureFiles {
        objects: files,
        calibration,
        templates,
        style,
    })
}

pub fn sample_stem(object_id: &str, frame: u32, m: SensorModality) -> String {
    format!("{object_id}_{frame:05}_{}", m.name())
}

/// One prompt file per control frame and modality, named
/// `{object}_{frame:05}_{modality}.json`.
pub fn gen_prompts(controls: &[ControlRecord], schema: PromptSchema, templates: &TemplateTable, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for c in controls {
        for m in SensorModality::ALL {
            let prompt = make_prompt(m, &c.pose, schema, templates, &c.object_id)?;
            let path = out.join(format!("{}.json", sample_stem(&c.object_id, c.frame_id, m)));
            io::write(&path, prompt.to_json().as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Synthesize the three modality targets of every control frame at
/// `size × size` and return the aligned, unpartitioned manifest. Prompt
/// files are expected under `prompts_dir` with the [`gen_prompts`] names.
#[allow(clippy::too_many_arguments)]
pub fn build_corpus(
    controls: &[ControlRecord],
    controls_dir: &Path,
    prompts_dir: &Path,
    style: &SynthStyleParams,
    size: usize,
    out: &Path,
    manifest_dir: &Path,
    pool: &Pool,
) -> Result<Manifest> {
    let per_frame: Vec<Vec<SampleRecord>> = pool.install(|| {
        controls
            .par_iter()
            .map(|c| -> Result<Vec<SampleRecord>> {
                let control_path = controls_dir.join(&c.control_path);
                let img = io::read_gray(&control_path)?;
                if img.width() % size != 0 || img.width() != img.height() {
                    return Err(CliError::Domain(format!(
                        "{}: {}x{} control does not reduce to {size}x{size}",
                        control_path.display(),
                        img.width(),
                        img.height()
                    )));
                }
                let small = img.area_downsample(img.width() / size)?;
                let mut recs = Vec::new();
                for m in SensorModality::ALL {
                    let stem = sample_stem(&c.object_id, c.frame_id, m);
                    let prompt = prompts_dir.join(format!("{stem}.json"));
                    if !prompt.exists() {
                        return Err(CliError::Domain(format!("missing prompt {}", prompt.display())));
                    }
                    let target = out.join("targets").join(format!("{stem}.png"));
                    io::write_rgb8(&target, &synth_targets(&small, m, style))?;
                    recs.push(SampleRecord {
                        object_id: c.object_id.clone(),
                        frame_id: c.frame_id,
                        pose: c.pose,
                        modality: m,
                        control_path: io::relative(&control_path, manifest_dir),
                        prompt_path: io::relative(&prompt, manifest_dir),
                        target_path: io::relative(&target, manifest_dir),
                        partition: Partition::default(),
                    });
                }
                Ok(recs)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Manifest::from_records(per_frame.into_iter().flatten().collect()))
}
