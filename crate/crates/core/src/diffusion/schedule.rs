//! Linear β schedule and the closed-form forward process.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::math::{cos, exp, ln, sin, sqrt};

pub const DEFAULT_TIMESTEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 2e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: DEFAULT_TIMESTEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
        }
    }
}

/// Timesteps are 1-based: `alpha_bar(0) = 1` and `alpha_bar(T)` is the
/// noisiest level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn linear(cfg: ScheduleConfig) -> Result<Self> {
        let ScheduleConfig {
            timesteps: t,
            beta_start: b0,
            beta_end: b1,
        } = cfg;
        if t < 2 {
            return Err(Error::InvalidSchedule("need at least two timesteps"));
        }
        if !(0.0 < b0 && b0 < b1 && b1 < 1.0) {
            return Err(Error::InvalidSchedule("betas must satisfy 0 < start < end < 1"));
        }
        let betas: Vec<f64> = (0..t).map(|i| b0 + (b1 - b0) * i as f64 / (t - 1) as f64).collect();
        let mut alpha_bars = Vec::with_capacity(t + 1);
        alpha_bars.push(1.0);
        // cumulative product in log space keeps the tail accurate
        let mut log_acc = 0.0;
        for b in &betas {
            log_acc += ln(1.0 - b);
            alpha_bars.push(exp(log_acc));
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `1 ≤ t ≤ T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    /// `ᾱ_t` for `0 ≤ t ≤ T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }
}

/// `z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·ε`.
pub fn forward_noise<T: Real>(z0: &Tensor<T>, t: usize, eps: &Tensor<T>, sched: &NoiseSchedule) -> Result<Tensor<T>> {
    if z0.shape != eps.shape {
        return Err(Error::ShapeMismatch {
            expected: z0.shape.to_vec(),
            actual: eps.shape.to_vec(),
        });
    }
    if t > sched.timesteps() {
        return Err(Error::InvalidSchedule("timestep beyond T"));
    }
    let ab = sched.alpha_bar(t);
    let (a, s) = (T::from_f64(sqrt(ab)), T::from_f64(sqrt(1.0 - ab)));
    Ok(Tensor {
        shape: z0.shape,
        data: z0.data.iter().zip(&eps.data).map(|(&x, &e)| a * x + s * e).collect(),
    })
}

/// Sinusoidal features of `t`: `dim/2` sines then `dim/2` cosines over
/// geometrically spaced frequencies.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    let freq = |i: usize| exp(-ln(10_000.0) * i as f64 / half as f64);
    out.extend((0..half).map(|i| sin(t as f64 * freq(i))));
    out.extend((0..half).map(|i| cos(t as f64 * freq(i))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_invariants() {
        let s = NoiseSchedule::linear(ScheduleConfig::default()).unwrap();
        assert_eq!(s.timesteps(), 1000);
        assert_eq!(s.alpha_bar(0), 1.0);
        assert!((s.beta(1) - 1e-4).abs() < 1e-18 && (s.beta(1000) - 2e-2).abs() < 1e-15);
        for t in 1..=1000 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        // direct product oracle
        let direct: f64 = (1..=500).map(|t| 1.0 - s.beta(t)).product();
        assert!((direct - s.alpha_bar(500)).abs() < 1e-12);
        assert!(s.alpha_bar(1000) < 1e-4);
        let bad = ScheduleConfig {
            beta_start: 0.02,
            beta_end: 0.01,
            ..ScheduleConfig::default()
        };
        assert!(matches!(NoiseSchedule::linear(bad), Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn forward_noise_boundaries() {
        let s = NoiseSchedule::linear(ScheduleConfig::default()).unwrap();
        let z0 = Tensor::<f64>::from_vec([1, 2, 2], alloc::vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        let eps = Tensor::from_vec([1, 2, 2], alloc::vec![1.0, 1.0, -1.0, 0.3]).unwrap();
        assert_eq!(forward_noise(&z0, 0, &eps, &s).unwrap(), z0);
        let zero = Tensor::zeros([1, 2, 2]);
        let zt = forward_noise(&zero, 700, &eps, &s).unwrap();
        let k = sqrt(1.0 - s.alpha_bar(700));
        for (a, e) in zt.data.iter().zip(&eps.data) {
            assert_eq!(*a, k * e);
        }
        let wrong = Tensor::zeros([1, 2, 3]);
        assert!(forward_noise(&z0, 5, &wrong, &s).is_err());
    }

    #[test]
    fn embedding_shape() {
        let e = timestep_embedding(0, 32);
        assert_eq!(e.len(), 32);
        assert!(e[..16].iter().all(|&v| v == 0.0) && e[16..].iter().all(|&v| v == 1.0));
    }
}
