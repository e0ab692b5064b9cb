//! `handcrafted-v1`: pooled gradient-orientation histograms plus intensity
//! moments.
//!
//! Layout (d = 64): 12-bin histograms for the whole image (0..12) and the
//! four quadrant cells in row-major order (12..60), then the luma mean,
//! standard deviation, cube root of the third central moment and fourth root
//! of the fourth (60..64). Histogram bins hold summed gradient magnitude per
//! pixel of the pooled region.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::math::{cbrt, floor, sqrt};

pub const FEATURE_DIM: usize = 64;
const BINS: usize = 12;
const BINS_PER_QUADRANT: usize = BINS / 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Extractor {
    #[default]
    #[serde(rename = "handcrafted-v1")]
    HandcraftedV1,
}

impl Extractor {
    pub fn id(self) -> &'static str {
        match self {
            Self::HandcraftedV1 => "handcrafted-v1",
        }
    }
}

/// Orientation bin of a non-zero gradient. The vector is first rotated by a
/// multiple of 90° into the open first quadrant using exact sign flips, so
/// rotating the image by 90° shifts bins by exactly three.
fn orientation_bin(gx: f64, gy: f64) -> usize {
    let (q, a, b) = if gx > 0.0 && gy >= 0.0 {
        (0, gx, gy)
    } else if gx <= 0.0 && gy > 0.0 {
        (1, gy, -gx)
    } else if gx < 0.0 && gy <= 0.0 {
        (2, -gx, -gy)
    } else {
        (3, -gy, gx)
    };
    let angle = libm::atan2(b, a);
    let sub = floor(angle / (core::f64::consts::FRAC_PI_2 / BINS_PER_QUADRANT as f64)) as usize;
    q * BINS_PER_QUADRANT + sub.min(BINS_PER_QUADRANT - 1)
}

fn histograms(luma: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut global = vec![0.0; BINS];
    let mut cells = vec![0.0; 4 * BINS];
    let at = |u: usize, v: usize| luma[v * w + u];
    for v in 1..h.saturating_sub(1) {
        for u in 1..w.saturating_sub(1) {
            let gx = (at(u + 1, v) - at(u - 1, v)) / 2.0;
            let gy = (at(u, v + 1) - at(u, v - 1)) / 2.0;
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            let mag = sqrt(gx * gx + gy * gy);
            let bin = orientation_bin(gx, gy);
            global[bin] += mag;
            let cell = (v >= h / 2) as usize * 2 + (u >= w / 2) as usize;
            cells[cell * BINS + bin] += mag;
        }
    }
    let n = (w * h) as f64;
    global.iter_mut().for_each(|x| *x /= n);
    cells.iter_mut().for_each(|x| *x /= n / 4.0);
    (global, cells)
}

fn moments(luma: &[f64]) -> [f64; 4] {
    let n = luma.len() as f64;
    let mean = luma.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in luma {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    [mean, sqrt(m2 / n), cbrt(m3 / n), sqrt(sqrt(m4 / n))]
}

/// Fixed-length descriptor of `image` (luma for RGB input).
pub fn extract_features(image: &Image, extractor: Extractor) -> Vec<f64> {
    match extractor {
        Extractor::HandcraftedV1 => {
            let (global, cells, mom) = levels(image);
            let mut out = Vec::with_capacity(FEATURE_DIM);
            out.extend(global);
            out.extend(cells);
            out.extend(mom);
            out
        }
    }
}

fn levels(image: &Image) -> (Vec<f64>, Vec<f64>, [f64; 4]) {
    let luma = image.luma();
    let (global, cells) = histograms(&luma, image.width(), image.height());
    (global, cells, moments(&luma))
}

/// Mean over pooling levels of the per-level mean squared feature
/// difference; a perceptual proxy, not canonical LPIPS.
pub fn perceptual_proxy(a: &Image, b: &Image) -> f64 {
    let (ga, ca, ma) = levels(a);
    let (gb, cb, mb) = levels(b);
    let msd = |x: &[f64], y: &[f64]| {
        x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64
    };
    let mut coarse_a = ga;
    coarse_a.extend(ma);
    let mut coarse_b = gb;
    coarse_b.extend(mb);
    (msd(&coarse_a, &coarse_b) + msd(&ca, &cb)) / 2.0
}
