//! Training, sampling and evaluation over manifests on disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tactdiff_core::dataset::{Manifest, Partition, SampleRecord};
use tactdiff_core::diffusion::checkpoint::{CheckpointMeta, VERSION};
use tactdiff_core::diffusion::{
    control_tensor, ddim_sample, example, CodecMode, Example, LossRecord, Model, SamplerConfig, StageSummary,
    TrainConfig, Trainer,
};
use tactdiff_core::image::Image;
use tactdiff_core::metrics::{Evaluated, Extractor, MetricReport};
use tactdiff_core::prompts::{embed_prompt, parse_prompt, ConditionEmbedding};

use crate::corpus::sample_stem;
use crate::error::{CliError, Result};
use crate::exec::Pool;
use crate::io;

pub fn latent_size(mode: CodecMode) -> usize {
    match mode {
        CodecMode::Conv => 16,
        CodecMode::Identity => 64,
    }
}

pub fn load_prompt(path: &Path) -> Result<ConditionEmbedding> {
    let sp = parse_prompt(&io::read(path)?, false).map_err(|e| CliError::format(path, e))?;
    Ok(embed_prompt(&sp)?)
}

/// Records of `partition` (all records for `None`) with their examples.
pub fn load_examples(
    manifest: &Manifest,
    base: &Path,
    partition: Option<Partition>,
    mode: CodecMode,
    pool: &Pool,
) -> Result<Vec<(SampleRecord, Example<f32>)>> {
    let recs: Vec<&SampleRecord> = manifest
        .records
        .iter()
        .filter(|r| partition.is_none_or(|p| r.partition == p))
        .collect();
    let size = latent_size(mode);
    pool.install(|| {
        recs.par_iter()
            .map(|r| {
                let target = io::read_rgb(&base.join(&r.target_path))?;
                let control = io::read_gray(&base.join(&r.control_path))?;
                let cond = load_prompt(&base.join(&r.prompt_path))?;
                Ok(((*r).clone(), example(&target, &control, &cond, size)?))
            })
            .collect()
    })
}

pub const LOSS_COLUMNS: [&str; 6] = ["stage", "step", "stage_step", "train_loss", "grad_norm", "val_loss"];

pub fn loss_csv(records: &[LossRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LOSS_COLUMNS).expect("in-memory CSV");
    for r in records {
        w.write_record([
            r.stage.name().to_string(),
            r.step.to_string(),
            r.stage_step.to_string(),
            r.train_loss.to_string(),
            r.grad_norm.to_string(),
            r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

pub struct TrainOutput {
    pub model: Model<f32>,
    pub meta: CheckpointMeta,
    pub losses: Vec<LossRecord>,
}

/// Train on the `train` partition, validating on `val`.
pub fn train(
    config: TrainConfig,
    manifest: &Manifest,
    base: &Path,
    created_at: Option<String>,
    pool: &Pool,
    progress: &mut dyn FnMut(&LossRecord),
) -> Result<TrainOutput> {
    let strip = |v: Vec<(SampleRecord, Example<f32>)>| v.into_iter().map(|(_, e)| e).collect::<Vec<_>>();
    let train = strip(load_examples(manifest, base, Some(Partition::Train), config.codec, pool)?);
    if train.is_empty() {
        return Err(CliError::Domain("manifest has no training records".into()));
    }
    let val = strip(load_examples(manifest, base, Some(Partition::Val), config.codec, pool)?);
    train_examples(config, &train, &val, created_at, pool, progress)
}

pub fn train_examples(
    config: TrainConfig,
    train: &[Example<f32>],
    val: &[Example<f32>],
    created_at: Option<String>,
    pool: &Pool,
    progress: &mut dyn FnMut(&LossRecord),
) -> Result<TrainOutput> {
    let mut trainer = Trainer::<f32, _>::new(config.clone(), pool)?;
    let mut losses = Vec::new();
    let stages: Vec<StageSummary> = trainer.run(train, val, &mut |r| {
        progress(r);
        losses.push(r.clone());
    })?;
    let meta = CheckpointMeta {
        format_version: VERSION,
        codec: config.codec,
        denoiser: config.denoiser,
        schedule: config.schedule,
        total_steps: losses.len(),
        train: config,
        stages,
        created_at,
    };
    Ok(TrainOutput {
        model: trainer.model,
        meta,
        losses,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, CheckpointMeta)> {
    Model::from_checkpoint(&io::read(path)?).map_err(|e| CliError::format(path, e))
}

/// Sample one image; `control = None` uses the null control.
pub fn sample_one(
    model: &Model<f32>,
    cfg: &SamplerConfig,
    cond: &ConditionEmbedding,
    control: Option<&Image>,
    key: u64,
) -> Result<Image> {
    let size = model.denoiser.latent_shape[1];
    let ctrl = control.map(|c| control_tensor::<f32>(c, size)).transpose()?;
    let cond: Vec<f32> = cond.0.iter().map(|&v| v as f32).collect();
    Ok(ddim_sample(&model.denoiser, &model.codec, &model.schedule, cfg, Some(&cond), ctrl.as_ref(), key)?)
}

pub fn generated_name(r: &SampleRecord) -> String {
    format!("{}.png", sample_stem(&r.object_id, r.frame_id, r.modality))
}

/// Records selected for batch sampling / evaluation: manifest order,
/// optionally one partition, at most `limit`. Each comes with its index in
/// the manifest, which keys the initial latent.
pub fn select(manifest: &Manifest, partition: Option<Partition>, limit: Option<usize>) -> Vec<(usize, &SampleRecord)> {
    manifest
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| partition.is_none_or(|p| r.partition == p))
        .take(limit.unwrap_or(usize::MAX))
        .collect()
}

/// Sample every selected record into `out/{object}_{frame:05}_{modality}.png`.
pub fn sample_manifest(
    model: &Model<f32>,
    cfg: &SamplerConfig,
    base: &Path,
    selected: &[(usize, &SampleRecord)],
    out: &Path,
    pool: &Pool,
) -> Result<Vec<PathBuf>> {
    pool.install(|| {
        selected
            .par_iter()
            .map(|&(i, r)| {
                let cond = load_prompt(&base.join(&r.prompt_path))?;
                let control = io::read_gray(&base.join(&r.control_path))?;
                let img = sample_one(model, cfg, &cond, Some(&control), i as u64)?;
                let path = out.join(generated_name(r));
                io::write_rgb8(&path, &img)?;
                Ok(path)
            })
            .collect()
    })
}

/// Score generated images against manifest targets. Missing files are
/// listed and the report is flagged partial.
pub fn evaluate(
    selected: &[(usize, &SampleRecord)],
    base: &Path,
    generated: &Path,
    extractor: Extractor,
    pool: &Pool,
) -> Result<MetricReport> {
    let results: Vec<Result<Option<Evaluated>>> = pool.install(|| {
        selected
            .par_iter()
            .map(|&(_, r)| {
                let gen_path = generated.join(generated_name(r));
                if !gen_path.exists() {
                    return Ok(None);
                }
                let reference = io::read_rgb(&base.join(&r.target_path))?;
                let gen = io::read_rgb(&gen_path)?;
                Ok(Some(Evaluated::compute(r.modality, &reference, &gen, extractor)?))
            })
            .collect()
    });
    let mut items = Vec::new();
    let mut missing = Vec::new();
    for (res, (_, r)) in results.into_iter().zip(selected) {
        match res? {
            Some(e) => items.push(e),
            None => missing.push(generated_name(r)),
        }
    }
    Ok(MetricReport::build(&items, missing, extractor)?)
}
