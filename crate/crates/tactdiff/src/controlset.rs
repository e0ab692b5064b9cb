//! Batch control-image generation from an STL and a pose log.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactdiff_core::control::{process_frame, CalibrationParams, ControlImage, FrameOutcome};
use tactdiff_core::geometry::{ContactPose, TriangleMesh};
use tactdiff_core::render::{extract_mask, render_depth, DepthMap, ObjectMask, OrthoCamera, DEFAULT_MASK_THRESHOLD};

use crate::error::Result;
use crate::exec::Pool;
use crate::io::{self, PoseRow};

/// Accepted frame as listed in the control manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlRecord {
    pub object_id: String,
    pub frame_id: u32,
    pub pose: ContactPose,
    /// Relative to the manifest's directory.
    pub control_path: String,
    pub alignment_error_px: f64,
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectRecord {
    pub object_id: String,
    pub frame_id: u32,
    /// 1-based data row of the pose log.
    pub row: usize,
    pub reason: String,
    pub alignment_error_px: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlSet {
    pub accepted: Vec<ControlRecord>,
    pub rejects: Vec<RejectRecord>,
}

pub fn control_file_name(object_id: &str, frame: u32) -> String {
    format!("{object_id}_{frame:05}.png")
}

/// Canonical-pose depth map and object mask of `mesh`.
pub fn canonical_render(mesh: &TriangleMesh, camera: &OrthoCamera) -> Result<(DepthMap, ObjectMask)> {
    let r = render_depth(mesh, camera)?;
    let mask = extract_mask(&r.depth.image, DEFAULT_MASK_THRESHOLD);
    Ok((r.depth, mask))
}

/// Process every row in parallel; outcomes are returned in row order.
pub fn process_rows(
    depth: &DepthMap,
    mask: &ObjectMask,
    object_id: &str,
    rows: &[PoseRow],
    cal: &CalibrationParams,
    pool: &Pool,
) -> Vec<FrameOutcome> {
    pool.install(|| rows.par_iter().map(|r| process_frame(depth, mask, object_id, &r.pose, cal)).collect())
}

/// Render once, transform every pose and write accepted controls as
/// `{object}_{frame:05}.png` under `out_dir`, plus the canonical depth map
/// and mask. Paths in the result are relative to `manifest_dir`.
#[allow(clippy::too_many_arguments)]
pub fn build_control_set(
    mesh: &TriangleMesh,
    object_id: &str,
    rows: &[PoseRow],
    cal: &CalibrationParams,
    camera: &OrthoCamera,
    out_dir: &Path,
    manifest_dir: &Path,
    pool: &Pool,
) -> Result<ControlSet> {
    cal.validate()?;
    let (depth, mask) = canonical_render(mesh, camera)?;
    io::write_depth(&out_dir.join(format!("{object_id}_depth.png")), &depth)?;
    io::write_mask(&out_dir.join(format!("{object_id}_mask.png")), &mask)?;
    let outcomes = process_rows(&depth, &mask, object_id, rows, cal, pool);
    let mut set = ControlSet::default();
    let mut writes: Vec<(std::path::PathBuf, &ControlImage)> = Vec::new();
    for (row, outcome) in rows.iter().zip(&outcomes) {
        match outcome {
            FrameOutcome::Accepted {
                control,
                alignment_error_px,
                retried,
            } => {
                let path = out_dir.join(control_file_name(object_id, row.frame));
                set.accepted.push(ControlRecord {
                    object_id: object_id.into(),
                    frame_id: row.frame,
                    pose: row.pose,
                    control_path: io::relative(&path, manifest_dir),
                    alignment_error_px: *alignment_error_px,
                    retried: *retried,
                });
                writes.push((path, control));
            }
            FrameOutcome::Rejected {
                reason,
                alignment_error_px,
            } => set.rejects.push(RejectRecord {
                object_id: object_id.into(),
                frame_id: row.frame,
                row: row.row,
                reason: reason.clone(),
                alignment_error_px: *alignment_error_px,
            }),
        }
    }
    pool.install(|| writes.par_iter().map(|(p, c)| io::write_gray16(p, &c.image)).collect::<Result<Vec<()>>>())?;
    Ok(set)
}
