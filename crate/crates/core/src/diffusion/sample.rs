//! Classifier-free guidance and the deterministic DDIM sampler.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::codec::{tensor_to_image, LatentCodec};
use super::schedule::NoiseSchedule;
use super::tensor::{Real, Tensor};
use super::unet::{Control, Denoiser};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::sqrt;
use crate::rng::{keyed_stream, normal, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub steps: usize,
    pub w_cfg: f64,
    /// Only the deterministic sampler (`eta = 0`) is supported.
    pub eta: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            w_cfg: 3.0,
            eta: 0.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Descending timesteps `T, T−k, …, k` for stride `k = T / steps`.
    pub fn timesteps(&self, sched: &NoiseSchedule) -> Result<Vec<usize>> {
        let t = sched.timesteps();
        if self.eta != 0.0 {
            return Err(Error::InvalidSampler("only eta = 0 is supported"));
        }
        if !(self.w_cfg >= 0.0 && self.w_cfg.is_finite()) {
            return Err(Error::InvalidSampler("guidance weight must be finite and non-negative"));
        }
        if self.steps == 0 || self.steps > t || t % self.steps != 0 {
            return Err(Error::InvalidSampler("steps must divide the schedule length"));
        }
        let stride = t / self.steps;
        Ok((1..=self.steps).rev().map(|i| i * stride).collect())
    }
}

/// `ε_u + w·(ε_c − ε_u)`, evaluated from the nearer endpoint so that
/// `w = 0` returns `ε_u` and `w = 1` returns `ε_c` bit for bit.
pub fn cfg_fuse<T: Real>(eps_uncond: &Tensor<T>, eps_cond: &Tensor<T>, w_cfg: T) -> Result<Tensor<T>> {
    if eps_uncond.shape != eps_cond.shape {
        return Err(Error::ShapeMismatch {
            expected: eps_uncond.shape.to_vec(),
            actual: eps_cond.shape.to_vec(),
        });
    }
    let half = T::from_f64(0.5);
    let data = eps_uncond
        .data
        .iter()
        .zip(&eps_cond.data)
        .map(|(&u, &c)| {
            if w_cfg < half {
                u + w_cfg * (c - u)
            } else {
                c + (w_cfg - T::ONE) * (c - u)
            }
        })
        .collect();
    Ok(Tensor {
        shape: eps_uncond.shape,
        data,
    })
}

/// Seeded initial latent `z_T ~ N(0, I)`; `key` separates images drawn
/// under one seed.
pub fn initial_latent<T: Real>(shape: [usize; 3], seed: u64, key: u64) -> Tensor<T> {
    let mut rng = keyed_stream(seed, Stream::Sampling, key);
    let n = shape.iter().product();
    Tensor {
        shape,
        data: (0..n).map(|_| T::from_f64(normal(&mut rng))).collect(),
    }
}

/// Run DDIM from `z_T` to a latent `ẑ_0`.
pub fn ddim_latent<T: Real>(
    den: &Denoiser<T>,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    cond: Option<&[T]>,
    control: Option<&Tensor<T>>,
    z_t: Tensor<T>,
) -> Result<Tensor<T>> {
    let ts = cfg.timesteps(sched)?;
    let stride = sched.timesteps() / cfg.steps;
    let w = T::from_f64(cfg.w_cfg);
    let mut z = z_t;
    for (i, &t) in ts.iter().enumerate() {
        let ctrl = match control {
            Some(c) => Control::Image(c),
            None => Control::Null,
        };
        let eps_c = den.denoise(&z, t, cond, ctrl)?;
        let eps = if cfg.w_cfg == 1.0 {
            eps_c
        } else {
            let eps_u = den.denoise(&z, t, None, Control::Null)?;
            cfg_fuse(&eps_u, &eps_c, w)?
        };
        let (ab, ab_prev) = (sched.alpha_bar(t), sched.alpha_bar(t - stride));
        let (sa, sb) = (T::from_f64(sqrt(ab)), T::from_f64(sqrt(1.0 - ab)));
        let (pa, pb) = (T::from_f64(sqrt(ab_prev)), T::from_f64(sqrt(1.0 - ab_prev)));
        for (zv, &e) in z.data.iter_mut().zip(&eps.data) {
            let x0 = (*zv - sb * e) / sa;
            *zv = pa * x0 + pb * e;
        }
        if !z.all_finite() {
            return Err(Error::NonFiniteLatent(i));
        }
    }
    Ok(z)
}

/// Sample an image: seeded `z_T`, guided DDIM, decode and clip to [0, 1].
#[allow(clippy::too_many_arguments)]
pub fn ddim_sample<T: Real>(
    den: &Denoiser<T>,
    codec: &LatentCodec<T>,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    cond: Option<&[T]>,
    control: Option<&Tensor<T>>,
    key: u64,
) -> Result<Image> {
    let z_t = initial_latent(den.latent_shape, cfg.seed, key);
    let z0 = ddim_latent(den, sched, cfg, cond, control, z_t)?;
    Ok(tensor_to_image(&codec.decode(&z0)?))
}
