//! Backprop versus central finite differences in 64-bit arithmetic.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::codec::{CodecMode, LatentCodec};
use super::params::{ParamId, ParamSet};
use super::schedule::{NoiseSchedule, ScheduleConfig};
use super::tensor::Tensor;
use super::unet::{Control, Denoiser, DenoiserConfig, TrainItem};
use crate::error::Result;
use crate::rng::{normal, stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub class: &'static str,
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSample {
    /// `|a − n| / max(|a|, |n|, 1e-7)`; the floor keeps numerically zero
    /// gradients from dividing by round-off.
    pub fn relative_error(&self) -> f64 {
        let d = (self.analytic - self.numeric).abs();
        d / self.analytic.abs().max(self.numeric.abs()).max(1e-7)
    }
}

/// Layer class of a parameter, from its name.
pub fn layer_class(name: &str, shape: &[usize]) -> &'static str {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    if name.starts_with("codec.") {
        return if leaf == "b" { "codec_bias" } else { "codec_conv" };
    }
    if leaf == "pos" {
        return "positional_embedding";
    }
    if leaf == "null_emb" {
        return "null_embedding";
    }
    if leaf == "b" {
        return "bias";
    }
    if name.contains(".down") {
        return "conv_stride2";
    }
    if name.contains(".emb.") || name.contains(".time") || name.contains(".cond") {
        return "dense";
    }
    if name.contains("zero") || shape.get(1).is_some_and(|&k| k % 9 != 0) {
        return "conv1x1";
    }
    "conv3x3"
}

fn random_tensor(rng: &mut impl Rng, shape: [usize; 3], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor {
        shape,
        data: (0..n).map(|_| scale * normal(rng)).collect(),
    }
}

fn sample_indices(ps: &ParamSet<f64>, per_class: usize, rng: &mut impl Rng) -> Vec<(ParamId, usize, &'static str)> {
    let mut by_class: BTreeMap<&'static str, Vec<(ParamId, usize)>> = BTreeMap::new();
    for (id, p) in ps.iter() {
        let class = layer_class(&p.name, &p.shape);
        let e = by_class.entry(class).or_default();
        for k in 0..p.data.len() {
            e.push((id, k));
        }
    }
    let mut out = Vec::new();
    for (class, pool) in by_class {
        for _ in 0..per_class.min(pool.len()) {
            let (id, k) = pool[rng.random_range(0..pool.len())];
            out.push((id, k, class));
        }
    }
    out
}

fn check(
    ps: &ParamSet<f64>,
    grads: &[Vec<f64>],
    picks: Vec<(ParamId, usize, &'static str)>,
    h: f64,
    loss_at: &dyn Fn(&ParamSet<f64>) -> Result<f64>,
) -> Result<Vec<GradSample>> {
    let mut out = Vec::new();
    for (id, k, class) in picks {
        let mut plus = ps.clone();
        plus.get_mut(id).data[k] += h;
        let mut minus = ps.clone();
        minus.get_mut(id).data[k] -= h;
        let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
        out.push(GradSample {
            class,
            param: ps.get(id).name.clone(),
            index: k,
            analytic: grads[id.0][k],
            numeric,
        });
    }
    Ok(out)
}

/// Check `per_class` randomly chosen scalars of every denoiser and codec
/// layer class. The zero projections are first given random values so the
/// control path carries gradient.
pub fn gradient_check(seed: u64, per_class: usize) -> Result<Vec<GradSample>> {
    let mut rng = stream(seed, Stream::Validation);
    let sched = NoiseSchedule::linear(ScheduleConfig::default())?;
    let mut den = Denoiser::<f64>::new(DenoiserConfig::default(), [4, 16, 16], seed)?;
    let ids: Vec<ParamId> = den.params.iter().map(|(id, _)| id).collect();
    for id in ids {
        let p = den.params.get_mut(id);
        if p.name.starts_with("ctrl.zero") || p.name.ends_with(".pos") || p.name.ends_with("null_emb") || p.name.ends_with(".b") {
            for v in &mut p.data {
                *v = 0.05 * normal(&mut rng);
            }
        }
    }
    let z0 = random_tensor(&mut rng, [4, 16, 16], 1.0);
    let eps = random_tensor(&mut rng, [4, 16, 16], 1.0);
    let ctrl = random_tensor(&mut rng, [1, 16, 16], 0.5);
    let cond: Vec<f64> = (0..8).map(|_| normal(&mut rng)).collect();
    let mut samples = Vec::new();
    for null_cond in [false, true] {
        let item = TrainItem {
            z0: &z0,
            eps: &eps,
            t: 400,
            cond: if null_cond { None } else { Some(&cond) },
            control: Control::Image(&ctrl),
        };
        let (_, g) = den.loss_grads(&sched, &item)?;
        let mut picks = sample_indices(&den.params, per_class, &mut rng);
        picks.retain(|(_, _, c)| (*c == "null_embedding") == null_cond);
        let loss_at = |ps: &ParamSet<f64>| {
            let mut d = den.clone();
            d.params = ps.clone();
            d.loss(&sched, &item)
        };
        samples.extend(check(&den.params, &g.bufs, picks, 1e-5, &loss_at)?);
    }
    let codec = LatentCodec::<f64>::new(CodecMode::Conv, seed);
    let img = Tensor {
        shape: [3, 64, 64],
        data: (0..3 * 64 * 64).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    let (_, g) = codec.reconstruction_grads(&img)?;
    let mut picks = sample_indices(&codec.params, per_class, &mut rng);
    picks.retain(|(id, _, _)| codec.params.get(*id).trainable);
    let loss_at = |ps: &ParamSet<f64>| {
        let mut c = codec.clone();
        c.params = ps.clone();
        // the raw reconstruction objective, ignoring latent normalization
        Ok(c.reconstruction_grads(&img)?.0)
    };
    samples.extend(check(&codec.params, &g.bufs, picks, 1e-5, &loss_at)?);
    Ok(samples)
}
