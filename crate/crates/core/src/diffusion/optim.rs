//! AdamW with decoupled weight decay and global-norm gradient clipping.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamSet};
use super::tensor::Real;
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Rescale the gradient when its global L2 norm exceeds this (0 = off).
    pub clip_norm: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            clip_norm: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new<T: Real>(config: AdamWConfig, params: &ParamSet<T>) -> Self {
        let zeros = || params.iter().map(|(_, p)| vec![0.0; if p.trainable { p.data.len() } else { 0 }]).collect();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Apply one update; returns the pre-clipping gradient norm.
    pub fn step<T: Real>(&mut self, params: &mut ParamSet<T>, grads: &Grads<T>) -> f64 {
        let c = self.config;
        let norm = sqrt(grads.bufs.iter().flatten().map(|g| g.to_f64() * g.to_f64()).sum::<f64>());
        let clip = if c.clip_norm > 0.0 && norm > c.clip_norm { c.clip_norm / norm } else { 1.0 };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - crate::math::powi(c.beta1, t);
        let bc2 = 1.0 - crate::math::powi(c.beta2, t);
        for (i, g) in grads.bufs.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let id = super::params::ParamId(i);
            let p = params.get_mut(id);
            if !p.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, w) in p.data.iter_mut().enumerate() {
                let gk = g[k].to_f64() * clip;
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                let wk = w.to_f64();
                let next = wk - c.lr * (mh / (sqrt(vh) + c.eps) + c.weight_decay * wk);
                *w = T::from_f64(next);
            }
        }
        norm
    }
}
