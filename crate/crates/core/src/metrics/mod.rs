//! Image-quality metrics: MSE, PSNR, SSIM, Fréchet distance over pluggable
//! features, and per-modality report aggregation.

mod features;
mod frechet;
mod report;

pub use features::{extract_features, perceptual_proxy, Extractor, FEATURE_DIM};
pub use frechet::{frechet_distance, symmetric_eigen, FeatureSet, FrechetResult};
pub use report::{Evaluated, MeanStd, MetricReport, ModalityStats, PairMetrics, REPORT_SCHEMA_VERSION};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::{exp, log10};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

/// Mean squared difference over all channels.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image, max_val: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, max_val))
}

pub fn psnr_from_mse(mse: f64, max_val: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * log10(max_val * max_val / mse)
    }
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - c;
            exp(-x * x / (2.0 * sigma * sigma))
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of a `w × h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = Vec::with_capacity(ow * h);
    for v in 0..h {
        let row = &src[v * w..(v + 1) * w];
        for u in 0..ow {
            rows.push(taps.iter().zip(&row[u..u + k]).map(|(t, x)| t * x).sum::<f64>());
        }
    }
    let mut out = Vec::with_capacity(ow * oh);
    for v in 0..oh {
        for u in 0..ow {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                acc += t * rows[(v + j) * ow + u];
            }
            out.push(acc);
        }
    }
    out
}

/// Mean SSIM over every valid 11×11 Gaussian window of the luma planes.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let (x, y) = (a.luma(), b.luma());
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(s, t)| s * t).collect() };
    let mx = filter_valid(&x, w, h, &taps);
    let my = filter_valid(&y, w, h, &taps);
    let mxx = filter_valid(&prod(&x, &x), w, h, &taps);
    let myy = filter_valid(&prod(&y, &y), w, h, &taps);
    let mxy = filter_valid(&prod(&x, &y), w, h, &taps);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2))
            / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok(total / mx.len() as f64)
}
