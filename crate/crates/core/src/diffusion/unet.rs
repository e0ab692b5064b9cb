//! Dual-conditioned denoiser: a small U-shaped conv net over the latent,
//! plus a control branch that copies its encoder and feeds back through
//! zero-initialized 1×1 projections.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::nn::{Conv, Dense, ResBlock};
use super::params::{Grads, Init, ParamId, ParamSet};
use super::schedule::{forward_noise, timestep_embedding, NoiseSchedule};
use super::tape::{ConvSpec, NodeId, Tape};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserConfig {
    pub base_channels: usize,
    pub mid_channels: usize,
    pub time_dim: usize,
    pub emb_dim: usize,
    pub cond_dim: usize,
    pub hint_channels: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            base_channels: 32,
            mid_channels: 64,
            time_dim: 32,
            emb_dim: 64,
            cond_dim: crate::prompts::EMBED_DIM,
            hint_channels: 16,
        }
    }
}

/// How the control branch participates in a forward pass.
#[derive(Debug, Clone, Copy)]
pub enum Control<'a, T> {
    /// Branch not evaluated (base pretraining).
    Skip,
    /// Branch evaluated on an all-zero control image.
    Null,
    /// Control image at latent resolution, `[1, h, w]`.
    Image(&'a Tensor<T>),
}

#[derive(Debug, Clone)]
struct Encoder {
    conv_in: Conv,
    pos: ParamId,
    res1: ResBlock,
    down1: Conv,
    res2: ResBlock,
    down2: Conv,
    mid: ResBlock,
}

struct Features {
    s1: NodeId,
    s2: NodeId,
    mid: NodeId,
}

impl Encoder {
    fn new<T: Real>(
        ps: &mut ParamSet<T>,
        rng: &mut crate::rng::StreamRng,
        name: &str,
        cfg: &DenoiserConfig,
        latent: [usize; 3],
    ) -> Self {
        let (c1, c2, e) = (cfg.base_channels, cfg.mid_channels, cfg.emb_dim);
        let n = |s: &str| alloc::format!("{name}.{s}");
        Self {
            conv_in: Conv::new(ps, rng, &n("conv_in"), latent[0], c1, ConvSpec::SAME3, 1.0),
            pos: ps.add(&n("pos"), &[c1, latent[1], latent[2]], Init::Zeros, rng),
            res1: ResBlock::new(ps, rng, &n("res1"), c1, c1, e),
            down1: Conv::new(ps, rng, &n("down1"), c1, c2, ConvSpec::DOWN3, 1.0),
            res2: ResBlock::new(ps, rng, &n("res2"), c2, c2, e),
            down2: Conv::new(ps, rng, &n("down2"), c2, c2, ConvSpec::DOWN3, 1.0),
            mid: ResBlock::new(ps, rng, &n("mid"), c2, c2, e),
        }
    }

    fn apply<T: Real>(&self, tape: &mut Tape<'_, T>, z: NodeId, extra: Option<NodeId>, emb: NodeId) -> Features {
        let mut h = self.conv_in.apply(tape, z);
        h = tape.add_param(h, self.pos);
        if let Some(x) = extra {
            h = tape.add(h, x);
        }
        let s1 = self.res1.apply(tape, h, emb);
        let h = self.down1.apply(tape, s1);
        let s2 = self.res2.apply(tape, h, emb);
        let h = self.down2.apply(tape, s2);
        let mid = self.mid.apply(tape, h, emb);
        Features { s1, s2, mid }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    time1: Dense,
    time2: Dense,
    cond1: Dense,
    cond2: Dense,
    null_emb: ParamId,
    enc: Encoder,
    up2: Conv,
    dec2: ResBlock,
    up1: Conv,
    dec1: ResBlock,
    out: Conv,
    ctrl: Encoder,
    hint0: Conv,
    hint1: Conv,
    zero: [Conv; 3],
}

#[derive(Debug, Clone)]
pub struct Denoiser<T> {
    pub config: DenoiserConfig,
    pub latent_shape: [usize; 3],
    pub params: ParamSet<T>,
    layout: Layout,
}

/// Parameter name prefixes of the two trainable groups.
pub const BASE_PREFIX: &str = "base.";
pub const CONTROL_PREFIX: &str = "ctrl.";
pub const ZERO_PROJECTION_PREFIX: &str = "ctrl.zero";

impl<T: Real> Denoiser<T> {
    pub fn new(config: DenoiserConfig, latent_shape: [usize; 3], seed: u64) -> Result<Self> {
        let [_, h, w] = latent_shape;
        if h % 4 != 0 || w % 4 != 0 || config.time_dim % 2 != 0 {
            return Err(Error::ShapeMismatch {
                expected: alloc::vec![4, 4],
                actual: alloc::vec![h, w],
            });
        }
        let mut rng = stream(seed, Stream::Init);
        // codec parameters draw from the same stream; offset the denoiser
        rng.set_word_pos(1 << 40);
        let mut ps = ParamSet::new();
        let r = &mut rng;
        let cfg = &config;
        let (c1, c2, e) = (cfg.base_channels, cfg.mid_channels, cfg.emb_dim);
        let time1 = Dense::new(&mut ps, r, "base.time1", cfg.time_dim, e, 1.0);
        let time2 = Dense::new(&mut ps, r, "base.time2", e, e, 1.0);
        let cond1 = Dense::new(&mut ps, r, "base.cond1", cfg.cond_dim, e, 1.0);
        let cond2 = Dense::new(&mut ps, r, "base.cond2", e, e, 1.0);
        let null_emb = ps.add("base.null_emb", &[e], Init::Zeros, r);
        let enc = Encoder::new(&mut ps, r, "base.enc", cfg, latent_shape);
        let up2 = Conv::new(&mut ps, r, "base.up2", c2, c2, ConvSpec::SAME3, 1.0);
        let dec2 = ResBlock::new(&mut ps, r, "base.dec2", c2, c2, e);
        let up1 = Conv::new(&mut ps, r, "base.up1", c2, c1, ConvSpec::SAME3, 1.0);
        let dec1 = ResBlock::new(&mut ps, r, "base.dec1", c1, c1, e);
        let out = Conv::new(&mut ps, r, "base.out", c1, latent_shape[0], ConvSpec::SAME3, 0.3);
        let ctrl = Encoder::new(&mut ps, r, "ctrl.enc", cfg, latent_shape);
        let hint0 = Conv::new(&mut ps, r, "ctrl.hint0", 1, cfg.hint_channels, ConvSpec::SAME3, 1.4);
        let hint1 = Conv::new(&mut ps, r, "ctrl.hint1", cfg.hint_channels, c1, ConvSpec::SAME3, 1.0);
        let zero = [
            Conv::new(&mut ps, r, "ctrl.zero_s1", c1, c1, ConvSpec::POINT, 0.0),
            Conv::new(&mut ps, r, "ctrl.zero_s2", c2, c2, ConvSpec::POINT, 0.0),
            Conv::new(&mut ps, r, "ctrl.zero_mid", c2, c2, ConvSpec::POINT, 0.0),
        ];
        let mut d = Self {
            config,
            latent_shape,
            params: ps,
            layout: Layout {
                time1,
                time2,
                cond1,
                cond2,
                null_emb,
                enc,
                up2,
                dec2,
                up1,
                dec1,
                out,
                ctrl,
                hint0,
                hint1,
                zero,
            },
        };
        d.init_control_from_base();
        Ok(d)
    }

    /// Copy the base encoder into the control encoder (the branch starts as
    /// a clone of the pretrained encoder).
    pub fn init_control_from_base(&mut self) -> usize {
        self.params.copy_prefix("base.enc.", "ctrl.enc.")
    }

    pub fn zero_projections_are_zero(&self) -> bool {
        self.params
            .iter()
            .filter(|(_, p)| p.name.starts_with(ZERO_PROJECTION_PREFIX))
            .all(|(_, p)| p.data.iter().all(|&v| v == T::ZERO))
    }

    /// Control map at latent resolution.
    pub fn control_shape(&self) -> [usize; 3] {
        [1, self.latent_shape[1], self.latent_shape[2]]
    }

    /// Build the forward pass on `tape`, returning the predicted noise node.
    pub fn forward(
        &self,
        tape: &mut Tape<'_, T>,
        zt: &Tensor<T>,
        t: usize,
        cond: Option<&[T]>,
        control: Control<'_, T>,
    ) -> Result<NodeId> {
        zt.check_shape(self.latent_shape)?;
        let l = &self.layout;
        let temb: Vec<T> = timestep_embedding(t, self.config.time_dim).into_iter().map(T::from_f64).collect();
        let ti = tape.input(Tensor::vector(temb));
        let h = l.time1.apply(tape, ti);
        let h = tape.silu(h);
        let temb = l.time2.apply(tape, h);
        let cemb = match cond {
            Some(c) => {
                if c.len() != self.config.cond_dim {
                    return Err(Error::ShapeMismatch {
                        expected: alloc::vec![self.config.cond_dim],
                        actual: alloc::vec![c.len()],
                    });
                }
                let ci = tape.input(Tensor::vector(c.to_vec()));
                let h = l.cond1.apply(tape, ci);
                let h = tape.silu(h);
                l.cond2.apply(tape, h)
            }
            None => tape.param(l.null_emb),
        };
        let e = tape.add(temb, cemb);
        let e = tape.silu(e);
        let z = tape.input(zt.clone());
        let mut f = l.enc.apply(tape, z, None, e);
        let hint = match control {
            Control::Skip => None,
            Control::Null => Some(Tensor::zeros(self.control_shape())),
            Control::Image(c) => {
                c.check_shape(self.control_shape())?;
                Some(c.clone())
            }
        };
        if let Some(hint) = hint {
            let hi = tape.input(hint);
            let h = l.hint0.apply(tape, hi);
            let h = tape.silu(h);
            let h = l.hint1.apply(tape, h);
            let cf = l.ctrl.apply(tape, z, Some(h), e);
            let r1 = l.zero[0].apply(tape, cf.s1);
            let r2 = l.zero[1].apply(tape, cf.s2);
            let r3 = l.zero[2].apply(tape, cf.mid);
            f.s1 = tape.add(f.s1, r1);
            f.s2 = tape.add(f.s2, r2);
            f.mid = tape.add(f.mid, r3);
        }
        let h = tape.upsample2(f.mid);
        let h = l.up2.apply(tape, h);
        let h = tape.add(h, f.s2);
        let h = l.dec2.apply(tape, h, e);
        let h = tape.upsample2(h);
        let h = l.up1.apply(tape, h);
        let h = tape.add(h, f.s1);
        let h = l.dec1.apply(tape, h, e);
        let h = tape.silu(h);
        Ok(l.out.apply(tape, h))
    }

    /// Predicted noise without gradient bookkeeping.
    pub fn denoise(&self, zt: &Tensor<T>, t: usize, cond: Option<&[T]>, control: Control<'_, T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new(&self.params, false);
        let out = self.forward(&mut tape, zt, t, cond, control)?;
        Ok(tape.value(out).clone())
    }

    /// Noise-prediction loss `‖ε − ε_θ(z_t, t, c)‖²` (mean over elements)
    /// of one item and its parameter gradient.
    pub fn loss_grads(&self, sched: &NoiseSchedule, item: &TrainItem<'_, T>) -> Result<(f64, Grads<T>)> {
        let zt = forward_noise(item.z0, item.t, item.eps, sched)?;
        let mut tape = Tape::new(&self.params, true);
        let out = self.forward(&mut tape, &zt, item.t, item.cond, item.control)?;
        let (loss, seed) = super::codec::mse_seed(&tape.value(out).data, &item.eps.data);
        let mut grads = Grads::zeros_for(&self.params);
        tape.backward(out, seed, &mut grads);
        Ok((loss, grads))
    }

    pub fn loss(&self, sched: &NoiseSchedule, item: &TrainItem<'_, T>) -> Result<f64> {
        let zt = forward_noise(item.z0, item.t, item.eps, sched)?;
        let eps_hat = self.denoise(&zt, item.t, item.cond, item.control)?;
        Ok(super::codec::mse_seed(&eps_hat.data, &item.eps.data).0)
    }
}

/// One training example with its pre-drawn noise and timestep.
pub struct TrainItem<'a, T> {
    pub z0: &'a Tensor<T>,
    pub eps: &'a Tensor<T>,
    pub t: usize,
    pub cond: Option<&'a [T]>,
    pub control: Control<'a, T>,
}
