//! Three-stage training: codec reconstruction, base denoiser (text only),
//! then the control branch with the base frozen.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codec::{CodecMode, LatentCodec};
use super::optim::{AdamW, AdamWConfig};
use super::params::{Grads, ParamSet};
use super::schedule::{NoiseSchedule, ScheduleConfig};
use super::tensor::{Real, Tensor};
use super::unet::{Control, Denoiser, DenoiserConfig, TrainItem, BASE_PREFIX, CONTROL_PREFIX};
use crate::error::{Error, Result};
use crate::rng::{keyed_stream, normal, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Codec,
    Base,
    Control,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Codec => "codec",
            Self::Base => "base",
            Self::Control => "control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub stage: Stage,
    pub steps: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    /// Probability of replacing both conditions by their nulls.
    pub cond_dropout: f64,
    pub optimizer: AdamWConfig,
    pub stages: Vec<StageConfig>,
    /// Cap on the total number of steps; stage budgets are scaled down
    /// proportionally when it is smaller than their sum.
    pub max_steps: Option<usize>,
    pub eval_every: usize,
    pub patience: usize,
    pub validation_items: usize,
    /// Train the control stage with the control image forced to null.
    pub text_only: bool,
    pub schedule: ScheduleConfig,
    pub denoiser: DenoiserConfig,
    pub codec: CodecMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 8,
            cond_dropout: 0.1,
            optimizer: AdamWConfig::default(),
            stages: vec![
                StageConfig {
                    stage: Stage::Codec,
                    steps: 1500,
                    lr: 2e-3,
                },
                StageConfig {
                    stage: Stage::Base,
                    steps: 4000,
                    lr: 1e-3,
                },
                StageConfig {
                    stage: Stage::Control,
                    steps: 4000,
                    lr: 1e-3,
                },
            ],
            max_steps: None,
            eval_every: 100,
            patience: 10,
            validation_items: 48,
            text_only: false,
            schedule: ScheduleConfig::default(),
            denoiser: DenoiserConfig::default(),
            codec: CodecMode::Conv,
        }
    }
}

impl TrainConfig {
    /// Step budget per stage after applying `max_steps` by largest
    /// remainder.
    pub fn planned_steps(&self) -> Vec<usize> {
        let raw: Vec<usize> = self.stages.iter().map(|s| s.steps).collect();
        let total: usize = raw.iter().sum();
        let Some(cap) = self.max_steps.filter(|&c| c < total) else {
            return raw;
        };
        let mut out: Vec<usize> = raw.iter().map(|&s| s * cap / total).collect();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by_key(|&i| core::cmp::Reverse((raw[i] * cap) % total));
        let short = cap - out.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            out[i] += 1;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::EmptyBatch);
        }
        if !(0.0..=1.0).contains(&self.cond_dropout) {
            return Err(Error::InvalidSampler("condition dropout must lie in [0, 1]"));
        }
        NoiseSchedule::linear(self.schedule)?;
        Ok(())
    }
}

/// One training example: target image `[3, 64, 64]`, condition embedding
/// and control map at latent resolution `[1, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub image: Tensor<T>,
    pub cond: Vec<T>,
    pub control: Tensor<T>,
}

/// Maps a per-item closure over a batch. Results are returned in index
/// order so the reduction that follows is order-fixed.
pub trait BatchExecutor: Sync {
    fn map<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R>;
}

pub struct Sequential;

impl BatchExecutor for Sequential {
    fn map<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub stage: Stage,
    pub step: usize,
    pub stage_step: usize,
    pub train_loss: f64,
    pub grad_norm: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub steps_run: usize,
    pub stopped_early: bool,
    pub best_val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub codec: LatentCodec<T>,
    pub denoiser: Denoiser<T>,
    pub schedule: NoiseSchedule,
}

impl<T: Real> Model<T> {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let codec = LatentCodec::new(cfg.codec, cfg.seed);
        let denoiser = Denoiser::new(cfg.denoiser, codec.latent_shape, cfg.seed)?;
        Ok(Self {
            codec,
            denoiser,
            schedule: NoiseSchedule::linear(cfg.schedule)?,
        })
    }
}

/// Reduce per-item `(loss, grads)` in index order to batch means.
fn reduce<T: Real>(results: Vec<Result<(f64, Grads<T>)>>) -> Result<(f64, Grads<T>)> {
    let n = results.len();
    let mut it = results.into_iter();
    let (mut loss, mut acc) = it.next().ok_or(Error::EmptyBatch)??;
    for r in it {
        let (l, g) = r?;
        loss += l;
        acc.add_assign(&g);
    }
    acc.scale(T::from_f64(1.0 / n as f64));
    Ok((loss / n as f64, acc))
}

struct Pick {
    index: usize,
    t: usize,
    dropped: bool,
}

/// Epoch-shuffled batch order; one permutation per (stage, epoch).
struct Batcher {
    seed: u64,
    stage_key: u64,
    n: usize,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl Batcher {
    fn new(seed: u64, stage: Stage, n: usize) -> Self {
        Self {
            seed,
            stage_key: stage as u64,
            n,
            epoch: 0,
            order: Vec::new(),
            pos: usize::MAX,
        }
    }

    fn next(&mut self) -> usize {
        if self.pos >= self.order.len() {
            self.order = (0..self.n).collect();
            let mut rng = keyed_stream(self.seed, Stream::Batch, (self.stage_key << 32) | self.epoch);
            self.order.shuffle(&mut rng);
            self.epoch += 1;
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

fn noise_like<T: Real>(shape: [usize; 3], rng: &mut impl Rng) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor {
        shape,
        data: (0..n).map(|_| T::from_f64(normal(rng))).collect(),
    }
}

struct EarlyStop<T> {
    best: Option<f64>,
    bad: usize,
    snapshot: Option<ParamSet<T>>,
}

impl<T: Real> EarlyStop<T> {
    fn new() -> Self {
        Self {
            best: None,
            bad: 0,
            snapshot: None,
        }
    }

    /// Returns true when patience is exhausted.
    fn observe(&mut self, val: f64, params: &ParamSet<T>, patience: usize) -> bool {
        if self.best.is_none_or(|b| val < b) {
            self.best = Some(val);
            self.bad = 0;
            self.snapshot = Some(params.clone());
            false
        } else {
            self.bad += 1;
            self.bad >= patience
        }
    }
}

pub struct Trainer<'a, T, E> {
    pub config: TrainConfig,
    pub model: Model<T>,
    exec: &'a E,
    global_step: usize,
    latents: Vec<Tensor<T>>,
    val_latents: Vec<Tensor<T>>,
}

impl<'a, T: Real, E: BatchExecutor> Trainer<'a, T, E> {
    pub fn new(config: TrainConfig, exec: &'a E) -> Result<Self> {
        config.validate()?;
        let model = Model::new(&config)?;
        Ok(Self {
            config,
            model,
            exec,
            global_step: 0,
            latents: Vec::new(),
            val_latents: Vec::new(),
        })
    }

    /// Run every configured stage; `on_step` sees each loss record.
    pub fn run(
        &mut self,
        train: &[Example<T>],
        val: &[Example<T>],
        on_step: &mut dyn FnMut(&LossRecord),
    ) -> Result<Vec<StageSummary>> {
        if train.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let val = &val[..val.len().min(self.config.validation_items)];
        let plan = self.config.planned_steps();
        let stages = self.config.stages.clone();
        let mut summaries = Vec::new();
        let mut codec_ready = false;
        for (sc, &steps) in stages.iter().zip(&plan) {
            if sc.stage != Stage::Codec && !codec_ready {
                self.prepare_latents(train, val)?;
                codec_ready = true;
            }
            if sc.stage == Stage::Control {
                self.model.denoiser.init_control_from_base();
            }
            let s = self.run_stage(sc, steps, train, val, on_step)?;
            summaries.push(s);
            if sc.stage == Stage::Codec {
                codec_ready = false;
            }
        }
        if !codec_ready {
            self.prepare_latents(train, val)?;
        }
        Ok(summaries)
    }

    fn prepare_latents(&mut self, train: &[Example<T>], val: &[Example<T>]) -> Result<()> {
        let images: Vec<Tensor<T>> = train.iter().map(|e| e.image.clone()).collect();
        self.model.codec.fit_latent_stats(&images)?;
        let codec = &self.model.codec;
        let enc = |set: &[Example<T>]| -> Result<Vec<Tensor<T>>> {
            self.exec.map(set.len(), &|i| codec.encode(&set[i].image)).into_iter().collect()
        };
        self.latents = enc(train)?;
        self.val_latents = enc(val)?;
        Ok(())
    }

    fn set_trainable(&mut self, stage: Stage) {
        let c = &mut self.model.codec.params;
        let d = &mut self.model.denoiser.params;
        c.set_all_trainable(false);
        d.set_all_trainable(false);
        match stage {
            Stage::Codec => {
                c.set_trainable("codec.", true);
                c.set_trainable("codec.latent_", false);
            }
            Stage::Base => d.set_trainable(BASE_PREFIX, true),
            Stage::Control => d.set_trainable(CONTROL_PREFIX, true),
        }
    }

    fn draw(&self, stage: Stage, batcher: &mut Batcher) -> (Vec<Pick>, Vec<Tensor<T>>) {
        let step = self.global_step as u64;
        let seed = self.config.seed;
        let mut t_rng = keyed_stream(seed, Stream::Timestep, step);
        let mut n_rng = keyed_stream(seed, Stream::Noise, step);
        let mut d_rng = keyed_stream(seed, Stream::Dropout, step);
        let t_max = self.model.schedule.timesteps();
        let shape = self.model.denoiser.latent_shape;
        let mut picks = Vec::new();
        let mut noise = Vec::new();
        for _ in 0..self.config.batch_size {
            let index = batcher.next();
            if stage == Stage::Codec {
                picks.push(Pick {
                    index,
                    t: 0,
                    dropped: false,
                });
                continue;
            }
            let t = t_rng.random_range(1..=t_max);
            let dropped = d_rng.random::<f64>() < self.config.cond_dropout;
            noise.push(noise_like(shape, &mut n_rng));
            picks.push(Pick { index, t, dropped });
        }
        (picks, noise)
    }

    fn item<'x>(&self, stage: Stage, ex: &'x Example<T>, z0: &'x Tensor<T>, eps: &'x Tensor<T>, t: usize, dropped: bool) -> TrainItem<'x, T> {
        let control = match stage {
            Stage::Control if dropped || self.config.text_only => Control::Null,
            Stage::Control => Control::Image(&ex.control),
            _ => Control::Skip,
        };
        TrainItem {
            z0,
            eps,
            t,
            cond: if dropped { None } else { Some(&ex.cond) },
            control,
        }
    }

    fn validation_loss(&self, stage: Stage, val: &[Example<T>]) -> Result<Option<f64>> {
        if val.is_empty() {
            return Ok(None);
        }
        let m = &self.model;
        let losses: Vec<Result<f64>> = if stage == Stage::Codec {
            self.exec.map(val.len(), &|i| m.codec.reconstruction_loss(&val[i].image))
        } else {
            let t_max = m.schedule.timesteps();
            let shape = m.denoiser.latent_shape;
            let draws: Vec<(usize, Tensor<T>)> = (0..val.len())
                .map(|i| {
                    let mut rng = keyed_stream(self.config.seed, Stream::Validation, i as u64);
                    let t = rng.random_range(1..=t_max);
                    (t, noise_like(shape, &mut rng))
                })
                .collect();
            self.exec.map(val.len(), &|i| {
                let (t, eps) = &draws[i];
                let item = self.item(stage, &val[i], &self.val_latents[i], eps, *t, false);
                m.denoiser.loss(&m.schedule, &item)
            })
        };
        let mut sum = 0.0;
        for l in losses {
            sum += l?;
        }
        Ok(Some(sum / val.len() as f64))
    }

    fn run_stage(
        &mut self,
        sc: &StageConfig,
        steps: usize,
        train: &[Example<T>],
        val: &[Example<T>],
        on_step: &mut dyn FnMut(&LossRecord),
    ) -> Result<StageSummary> {
        let stage = sc.stage;
        let mut summary = StageSummary {
            stage,
            steps_run: 0,
            stopped_early: false,
            best_val_loss: None,
        };
        if stage == Stage::Codec && self.model.codec.mode == CodecMode::Identity {
            return Ok(summary);
        }
        self.set_trainable(stage);
        let ocfg = AdamWConfig {
            lr: sc.lr,
            ..self.config.optimizer
        };
        let mut opt = match stage {
            Stage::Codec => AdamW::new(ocfg, &self.model.codec.params),
            _ => AdamW::new(ocfg, &self.model.denoiser.params),
        };
        let mut batcher = Batcher::new(self.config.seed, stage, train.len());
        let mut stop = EarlyStop::new();
        for stage_step in 1..=steps {
            let (picks, noise) = self.draw(stage, &mut batcher);
            let m = &self.model;
            let results = if stage == Stage::Codec {
                self.exec
                    .map(picks.len(), &|i| m.codec.reconstruction_grads(&train[picks[i].index].image))
            } else {
                let latents = &self.latents;
                self.exec.map(picks.len(), &|i| {
                    let p = &picks[i];
                    let item = self.item(stage, &train[p.index], &latents[p.index], &noise[i], p.t, p.dropped);
                    m.denoiser.loss_grads(&m.schedule, &item)
                })
            };
            let (loss, grads) = reduce(results)?;
            self.global_step += 1;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss {
                    step: self.global_step,
                    loss,
                });
            }
            let grad_norm = match stage {
                Stage::Codec => opt.step(&mut self.model.codec.params, &grads),
                _ => opt.step(&mut self.model.denoiser.params, &grads),
            };
            summary.steps_run = stage_step;
            let eval_now = self.config.eval_every > 0 && (stage_step % self.config.eval_every == 0 || stage_step == steps);
            let val_loss = if eval_now { self.validation_loss(stage, val)? } else { None };
            on_step(&LossRecord {
                stage,
                step: self.global_step,
                stage_step,
                train_loss: loss,
                grad_norm,
                val_loss,
            });
            if let Some(v) = val_loss {
                let params = match stage {
                    Stage::Codec => &self.model.codec.params,
                    _ => &self.model.denoiser.params,
                };
                if stop.observe(v, params, self.config.patience) {
                    summary.stopped_early = true;
                    break;
                }
            }
        }
        summary.best_val_loss = stop.best;
        if let Some(best) = stop.snapshot {
            match stage {
                Stage::Codec => self.model.codec.params = best,
                _ => self.model.denoiser.params = best,
            }
        }
        Ok(summary)
    }
}

/// Identifier string for a stage sequence, e.g. `codec+base+control`.
pub fn stage_list(stages: &[StageConfig]) -> String {
    let mut s = String::new();
    for (i, st) in stages.iter().enumerate() {
        if i > 0 {
            s.push('+');
        }
        s.push_str(st.stage.name());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_corpus(n: usize) -> Vec<Example<f32>> {
        (0..n)
            .map(|k| {
                let v = 0.2 + 0.6 * (k % 3) as f32 / 2.0;
                Example {
                    image: Tensor::from_vec([3, 64, 64], vec![v; 3 * 64 * 64]).unwrap(),
                    cond: {
                        let mut c = vec![0.0; 8];
                        c[k % 3] = 1.0;
                        c
                    },
                    control: Tensor::from_vec([1, 16, 16], vec![(k % 2) as f32; 256]).unwrap(),
                }
            })
            .collect()
    }

    fn tiny_config(steps: [usize; 3]) -> TrainConfig {
        TrainConfig {
            stages: vec![
                StageConfig {
                    stage: Stage::Codec,
                    steps: steps[0],
                    lr: 2e-3,
                },
                StageConfig {
                    stage: Stage::Base,
                    steps: steps[1],
                    lr: 1e-3,
                },
                StageConfig {
                    stage: Stage::Control,
                    steps: steps[2],
                    lr: 1e-3,
                },
            ],
            batch_size: 2,
            eval_every: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn planned_steps_respect_cap() {
        let mut c = tiny_config([300, 400, 300]);
        assert_eq!(c.planned_steps(), vec![300, 400, 300]);
        c.max_steps = Some(10);
        assert_eq!(c.planned_steps(), vec![3, 4, 3]);
        c.max_steps = Some(11);
        assert_eq!(c.planned_steps().iter().sum::<usize>(), 11);
    }

    #[test]
    fn runs_all_stages_deterministically() {
        let data = tiny_corpus(6);
        let run = || {
            let mut tr = Trainer::<f32, _>::new(tiny_config([2, 2, 2]), &Sequential).unwrap();
            let mut log = Vec::new();
            let s = tr.run(&data, &data[..2], &mut |r| log.push(r.clone())).unwrap();
            (log, s, tr.model.denoiser.params)
        };
        let (a, sa, pa) = run();
        let (b, _, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(a.len(), 6);
        assert_eq!(sa.len(), 3);
        assert!(a.iter().all(|r| r.train_loss.is_finite()));
        assert!(a.iter().filter(|r| r.stage_step == 2).all(|r| r.val_loss.is_some()));
    }

    #[test]
    fn frozen_base_during_control_stage() {
        let data = tiny_corpus(4);
        let mut tr = Trainer::<f32, _>::new(tiny_config([0, 2, 0]), &Sequential).unwrap();
        tr.run(&data, &[], &mut |_| {}).unwrap();
        let before = tr.model.denoiser.params.clone();
        let cfg = tiny_config([0, 0, 2]);
        tr.config = cfg;
        tr.run(&data, &[], &mut |_| {}).unwrap();
        for ((_, p), (_, q)) in before.iter().zip(tr.model.denoiser.params.iter()) {
            if p.name.starts_with(BASE_PREFIX) {
                assert_eq!(p.data, q.data, "{}", p.name);
            }
        }
        assert!(!tr.model.denoiser.zero_projections_are_zero());
    }

    #[test]
    fn text_only_regime_trains() {
        let data = tiny_corpus(4);
        let mut cfg = tiny_config([0, 1, 2]);
        cfg.text_only = true;
        let mut tr = Trainer::<f32, _>::new(cfg, &Sequential).unwrap();
        let s = tr.run(&data, &[], &mut |_| {}).unwrap();
        assert_eq!(s[2].steps_run, 2);
    }
}
