//! Planar-interleaved float images.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved image with `f32` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width, channels],
                actual: vec![data.len()],
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-channel image from a per-pixel function of `(u, v)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.width, self.height, self.channels]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> f32 {
        self.data[(v * self.width + u) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, c: usize, value: f32) {
        self.data[(v * self.width + u) * self.channels + c] = value;
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Clamp every sample into `[0, 1]`.
    pub fn clamp01(&mut self) {
        for x in &mut self.data {
            *x = x.clamp(0.0, 1.0);
        }
    }

    /// Luma (`0.299 R + 0.587 G + 0.114 B`) as `f64`; identity for grey.
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&x| x as f64).collect(),
            3 => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect(),
            c => self
                .data
                .chunks_exact(c)
                .map(|p| p.iter().map(|&x| x as f64).sum::<f64>() / c as f64)
                .collect(),
        }
    }

    /// Box-filter downsample by an integer `factor` in both axes.
    pub fn area_downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::ShapeMismatch {
                expected: vec![factor, factor],
                actual: vec![self.width, self.height],
            });
        }
        let (w, h, ch) = (self.width / factor, self.height / factor, self.channels);
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = Self::zeros(w, h, ch);
        for v in 0..h {
            for u in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0f64;
                    for dv in 0..factor {
                        for du in 0..factor {
                            acc += self.get(u * factor + du, v * factor + dv, c) as f64;
                        }
                    }
                    out.set(u, v, c, (acc * norm) as f32);
                }
            }
        }
        Ok(out)
    }

    /// Copy of channel `c` as a single-channel image.
    pub fn channel(&self, c: usize) -> Self {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Self {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}
