//! Layer wrappers that register their parameters and emit tape ops.

use alloc::format;

use rand::Rng;

use super::params::{Init, ParamId, ParamSet};
use super::tape::{ConvSpec, NodeId, Tape};
use super::tensor::Real;
use crate::math::sqrt;

fn bound(fan_in: usize, gain: f64) -> f64 {
    gain * sqrt(3.0 / fan_in as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct Conv {
    pub w: ParamId,
    pub b: ParamId,
    pub spec: ConvSpec,
}

impl Conv {
    /// `gain = 0` gives an exactly zero-initialized projection.
    pub fn new<T: Real, R: Rng + ?Sized>(
        ps: &mut ParamSet<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        spec: ConvSpec,
        gain: f64,
    ) -> Self {
        let fan_in = cin * spec.kernel * spec.kernel;
        let init = if gain == 0.0 { Init::Zeros } else { Init::Uniform(bound(fan_in, gain)) };
        let w = ps.add(&format!("{name}.w"), &[cout, fan_in], init, rng);
        let b = ps.add(&format!("{name}.b"), &[cout], Init::Zeros, rng);
        Self { w, b, spec }
    }

    pub fn apply<T: Real>(&self, tape: &mut Tape<'_, T>, x: NodeId) -> NodeId {
        tape.conv(x, self.w, self.b, self.spec)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new<T: Real, R: Rng + ?Sized>(
        ps: &mut ParamSet<T>,
        rng: &mut R,
        name: &str,
        n_in: usize,
        n_out: usize,
        gain: f64,
    ) -> Self {
        let init = if gain == 0.0 { Init::Zeros } else { Init::Uniform(bound(n_in, gain)) };
        let w = ps.add(&format!("{name}.w"), &[n_out, n_in], init, rng);
        let b = ps.add(&format!("{name}.b"), &[n_out], Init::Zeros, rng);
        Self { w, b }
    }

    pub fn apply<T: Real>(&self, tape: &mut Tape<'_, T>, x: NodeId) -> NodeId {
        tape.linear(x, self.w, self.b)
    }
}

/// `skip(x) + conv(silu(conv(silu(x)) + proj(emb)))`, without normalization.
#[derive(Debug, Clone, Copy)]
pub struct ResBlock {
    conv1: Conv,
    emb: Dense,
    conv2: Conv,
    skip: Option<Conv>,
}

impl ResBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        ps: &mut ParamSet<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        emb_dim: usize,
    ) -> Self {
        let conv1 = Conv::new(ps, rng, &format!("{name}.conv1"), cin, cout, ConvSpec::SAME3, 1.4);
        let emb = Dense::new(ps, rng, &format!("{name}.emb"), emb_dim, cout, 1.0);
        let conv2 = Conv::new(ps, rng, &format!("{name}.conv2"), cout, cout, ConvSpec::SAME3, 0.5);
        let skip = (cin != cout).then(|| Conv::new(ps, rng, &format!("{name}.skip"), cin, cout, ConvSpec::POINT, 1.0));
        Self {
            conv1,
            emb,
            conv2,
            skip,
        }
    }

    pub fn apply<T: Real>(&self, tape: &mut Tape<'_, T>, x: NodeId, emb: NodeId) -> NodeId {
        let h = tape.silu(x);
        let h = self.conv1.apply(tape, h);
        let e = self.emb.apply(tape, emb);
        let h = tape.channel_bias(h, e);
        let h = tape.silu(h);
        let h = self.conv2.apply(tape, h);
        let s = match &self.skip {
            Some(c) => c.apply(tape, x),
            None => x,
        };
        tape.add(s, h)
    }
}
