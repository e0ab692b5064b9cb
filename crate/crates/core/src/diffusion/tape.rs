//! Reverse-mode differentiation over a recorded sequence of tensor ops.
//!
//! A network builds its forward pass on a [`Tape`]; [`Tape::backward`]
//! seeds the output gradient and walks the ops in reverse, accumulating
//! parameter gradients into a [`Grads`] buffer. Nodes that depend on no
//! trainable parameter are skipped.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{Grads, ParamId, ParamSet};
use super::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub const SAME3: Self = Self {
        kernel: 3,
        stride: 1,
        pad: 1,
    };
    pub const DOWN3: Self = Self {
        kernel: 3,
        stride: 2,
        pad: 1,
    };
    pub const POINT: Self = Self {
        kernel: 1,
        stride: 1,
        pad: 0,
    };

    fn out_size(&self, n: usize) -> usize {
        (n + 2 * self.pad - self.kernel) / self.stride + 1
    }
}

enum Op<T> {
    Input,
    Param(ParamId),
    Conv {
        x: NodeId,
        w: ParamId,
        b: ParamId,
        spec: ConvSpec,
        cols: Vec<T>,
    },
    Linear {
        x: NodeId,
        w: ParamId,
        b: ParamId,
    },
    Silu(NodeId),
    Add(NodeId, NodeId),
    AddParam(NodeId, ParamId),
    ChannelBias(NodeId, NodeId),
    Upsample2(NodeId),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<'p, T> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
    record: bool,
}

fn im2col<T: Real>(x: &Tensor<T>, spec: ConvSpec, oh: usize, ow: usize) -> Vec<T> {
    let [c, h, w] = x.shape;
    let k = spec.kernel;
    let n = oh * ow;
    let mut cols = vec![T::ZERO; c * k * k * n];
    for ci in 0..c {
        let plane = &x.data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * n..][..n];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..][..w];
                    let dst = &mut row[oy * ow..][..ow];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(dcols: &[T], shape: [usize; 3], spec: ConvSpec, oh: usize, ow: usize, dx: &mut [T]) {
    let [c, h, w] = shape;
    let k = spec.kernel;
    let n = oh * ow;
    for ci in 0..c {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &dcols[((ci * k + ky) * k + kx) * n..][..n];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            plane[iy as usize * w + ix as usize] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::ONE / (T::ONE + (-x).exp())
}

impl<'p, T: Real> Tape<'p, T> {
    /// `record = false` builds an inference-only tape that keeps no
    /// backward caches.
    pub fn new(params: &'p ParamSet<T>, record: bool) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            record,
        }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad: needs_grad && self.record,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn trainable(&self, p: ParamId) -> bool {
        self.params.get(p).trainable
    }

    fn needs(&self, n: NodeId) -> bool {
        self.nodes[n.0].needs_grad
    }

    pub fn value(&self, n: NodeId) -> &Tensor<T> {
        &self.nodes[n.0].value
    }

    pub fn input(&mut self, t: Tensor<T>) -> NodeId {
        self.push(t, Op::Input, false)
    }

    pub fn param(&mut self, p: ParamId) -> NodeId {
        let prm = self.params.get(p);
        let t = Tensor {
            shape: [prm.data.len(), 1, 1],
            data: prm.data.clone(),
        };
        let g = self.trainable(p);
        self.push(t, Op::Param(p), g)
    }

    /// Convolution with weight `[out, in·k·k]` and bias `[out]`.
    pub fn conv(&mut self, x: NodeId, w: ParamId, b: ParamId, spec: ConvSpec) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let [c, h, wd] = xv.shape;
        let (oh, ow) = (spec.out_size(h), spec.out_size(wd));
        let wp = self.params.get(w);
        let kk = c * spec.kernel * spec.kernel;
        let cout = wp.shape[0];
        assert_eq!(wp.data.len(), cout * kk, "conv weight shape for {}", wp.name);
        let n = oh * ow;
        let bias = &self.params.get(b).data;
        let mut out = Vec::with_capacity(cout * n);
        for &bv in bias.iter() {
            out.extend(core::iter::repeat_n(bv, n));
        }
        let point = spec.kernel == 1 && spec.stride == 1 && spec.pad == 0;
        let cols = if point { Vec::new() } else { im2col(xv, spec, oh, ow) };
        let src: &[T] = if point { &xv.data } else { &cols };
        T::gemm(cout, kk, n, T::ONE, &wp.data, (kk as isize, 1), src, (n as isize, 1), T::ONE, &mut out, n);
        let g = self.needs(x) || self.trainable(w) || self.trainable(b);
        let cols = if self.record && self.trainable(w) { cols } else { Vec::new() };
        self.push(Tensor { shape: [cout, oh, ow], data: out }, Op::Conv { x, w, b, spec, cols }, g)
    }

    /// Dense layer on a vector node, weight `[out, in]`.
    pub fn linear(&mut self, x: NodeId, w: ParamId, b: ParamId) -> NodeId {
        let xv = &self.nodes[x.0].value.data;
        let wp = self.params.get(w);
        let n_in = xv.len();
        let n_out = wp.shape[0];
        assert_eq!(wp.data.len(), n_out * n_in, "linear weight shape for {}", wp.name);
        let mut out = self.params.get(b).data.clone();
        T::gemm(n_out, n_in, 1, T::ONE, &wp.data, (n_in as isize, 1), xv, (1, 1), T::ONE, &mut out, 1);
        let g = self.needs(x) || self.trainable(w) || self.trainable(b);
        self.push(Tensor::vector(out), Op::Linear { x, w, b }, g)
    }

    pub fn silu(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let data = xv.data.iter().map(|&v| v * sigmoid(v)).collect();
        let t = Tensor { shape: xv.shape, data };
        let g = self.needs(x);
        self.push(t, Op::Silu(x), g)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.shape, bv.shape);
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| x + y).collect();
        let t = Tensor { shape: av.shape, data };
        let g = self.needs(a) || self.needs(b);
        self.push(t, Op::Add(a, b), g)
    }

    /// Add a parameter of identical element count (e.g. a positional map).
    pub fn add_param(&mut self, x: NodeId, p: ParamId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let pv = &self.params.get(p).data;
        assert_eq!(xv.len(), pv.len());
        let data = xv.data.iter().zip(pv).map(|(&a, &b)| a + b).collect();
        let t = Tensor { shape: xv.shape, data };
        let g = self.needs(x) || self.trainable(p);
        self.push(t, Op::AddParam(x, p), g)
    }

    /// Add `v[c]` to every element of channel `c`.
    pub fn channel_bias(&mut self, x: NodeId, v: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let vv = &self.nodes[v.0].value.data;
        assert_eq!(xv.channels(), vv.len());
        let plane = xv.plane();
        let data = xv.data.iter().enumerate().map(|(i, &a)| a + vv[i / plane]).collect();
        let t = Tensor { shape: xv.shape, data };
        let g = self.needs(x) || self.needs(v);
        self.push(t, Op::ChannelBias(x, v), g)
    }

    /// Nearest-neighbour 2× upsampling.
    pub fn upsample2(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let [c, h, w] = xv.shape;
        let mut data = Vec::with_capacity(c * h * w * 4);
        for ci in 0..c {
            for y in 0..2 * h {
                let row = &xv.data[(ci * h + y / 2) * w..][..w];
                for x2 in 0..2 * w {
                    data.push(row[x2 / 2]);
                }
            }
        }
        let g = self.needs(x);
        self.push(
            Tensor {
                shape: [c, 2 * h, 2 * w],
                data,
            },
            Op::Upsample2(x),
            g,
        )
    }

    /// Back-propagate `seed` (the gradient of the loss w.r.t. `out`).
    pub fn backward(&self, out: NodeId, seed: Vec<T>, grads: &mut Grads<T>) {
        assert!(self.record, "backward on an inference tape");
        let mut g: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        assert_eq!(seed.len(), self.nodes[out.0].value.len());
        g[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    if let Some(buf) = grads.buf_mut(*p) {
                        for (a, b) in buf.iter_mut().zip(&dy) {
                            *a += *b;
                        }
                    }
                }
                Op::Conv { x, w, b, spec, cols } => {
                    let xv = &self.nodes[x.0].value;
                    let cin_kk = xv.channels() * spec.kernel * spec.kernel;
                    let [cout, oh, ow] = node.value.shape;
                    let n = oh * ow;
                    if let Some(db) = grads.buf_mut(*b) {
                        for (co, d) in db.iter_mut().enumerate() {
                            *d += dy[co * n..(co + 1) * n].iter().fold(T::ZERO, |a, &v| a + v);
                        }
                    }
                    if let Some(dw) = grads.buf_mut(*w) {
                        let src: &[T] = if cols.is_empty() { &xv.data } else { cols };
                        T::gemm(
                            cout,
                            n,
                            cin_kk,
                            T::ONE,
                            &dy,
                            (n as isize, 1),
                            src,
                            (1, n as isize),
                            T::ONE,
                            dw,
                            cin_kk,
                        );
                    }
                    if self.needs(*x) {
                        let wv = &self.params.get(*w).data;
                        let point = spec.kernel == 1 && spec.stride == 1 && spec.pad == 0;
                        let dx = acc_slot(&mut g, *x, xv.len());
                        if point {
                            T::gemm(cin_kk, cout, n, T::ONE, wv, (1, cin_kk as isize), &dy, (n as isize, 1), T::ONE, dx, n);
                        } else {
                            let mut dcols = vec![T::ZERO; cin_kk * n];
                            T::gemm(
                                cin_kk,
                                cout,
                                n,
                                T::ONE,
                                wv,
                                (1, cin_kk as isize),
                                &dy,
                                (n as isize, 1),
                                T::ZERO,
                                &mut dcols,
                                n,
                            );
                            col2im(&dcols, xv.shape, *spec, oh, ow, dx);
                        }
                    }
                }
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value.data;
                    let n_in = xv.len();
                    if let Some(db) = grads.buf_mut(*b) {
                        for (d, v) in db.iter_mut().zip(&dy) {
                            *d += *v;
                        }
                    }
                    if let Some(dw) = grads.buf_mut(*w) {
                        for (o, &d) in dy.iter().enumerate() {
                            for (k, &xi) in xv.iter().enumerate() {
                                dw[o * n_in + k] += d * xi;
                            }
                        }
                    }
                    if self.needs(*x) {
                        let wv = &self.params.get(*w).data;
                        let dx = acc_slot(&mut g, *x, n_in);
                        for (o, &d) in dy.iter().enumerate() {
                            for (k, dxk) in dx.iter_mut().enumerate() {
                                *dxk += wv[o * n_in + k] * d;
                            }
                        }
                    }
                }
                Op::Silu(x) => {
                    let xv = &self.nodes[x.0].value.data;
                    let dx = acc_slot(&mut g, *x, xv.len());
                    for ((d, &v), &u) in dx.iter_mut().zip(xv).zip(&dy) {
                        let s = sigmoid(v);
                        *d += u * s * (T::ONE + v * (T::ONE - s));
                    }
                }
                Op::Add(a, b) => {
                    for n in [*a, *b] {
                        if self.needs(n) {
                            let d = acc_slot(&mut g, n, dy.len());
                            for (x, &u) in d.iter_mut().zip(&dy) {
                                *x += u;
                            }
                        }
                    }
                }
                Op::AddParam(x, p) => {
                    if let Some(buf) = grads.buf_mut(*p) {
                        for (a, &u) in buf.iter_mut().zip(&dy) {
                            *a += u;
                        }
                    }
                    if self.needs(*x) {
                        let d = acc_slot(&mut g, *x, dy.len());
                        for (a, &u) in d.iter_mut().zip(&dy) {
                            *a += u;
                        }
                    }
                }
                Op::ChannelBias(x, v) => {
                    let plane = node.value.plane();
                    if self.needs(*v) {
                        let c = node.value.channels();
                        let d = acc_slot(&mut g, *v, c);
                        for (ci, dv) in d.iter_mut().enumerate() {
                            *dv += dy[ci * plane..(ci + 1) * plane].iter().fold(T::ZERO, |a, &u| a + u);
                        }
                    }
                    if self.needs(*x) {
                        let d = acc_slot(&mut g, *x, dy.len());
                        for (a, &u) in d.iter_mut().zip(&dy) {
                            *a += u;
                        }
                    }
                }
                Op::Upsample2(x) => {
                    if self.needs(*x) {
                        let [c, h, w] = self.nodes[x.0].value.shape;
                        let d = acc_slot(&mut g, *x, c * h * w);
                        for ci in 0..c {
                            for y in 0..2 * h {
                                for x2 in 0..2 * w {
                                    d[(ci * h + y / 2) * w + x2 / 2] += dy[(ci * 2 * h + y) * 2 * w + x2];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn acc_slot<T: Real>(g: &mut [Option<Vec<T>>], n: NodeId, len: usize) -> &mut [T] {
    g[n.0].get_or_insert_with(|| vec![T::ZERO; len])
}
