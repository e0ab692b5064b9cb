//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tactdiff_core::image::Image;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_image(r: &mut impl Rng, w: usize, h: usize, c: usize) -> Image {
    let data = (0..w * h * c).map(|_| r.random::<f32>()).collect();
    Image::from_vec(w, h, c, data).unwrap()
}

/// Box-Muller standard normal.
pub fn gauss(r: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn mse(a: &Image, b: &Image) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for v in 0..a.height() {
        for u in 0..a.width() {
            for c in 0..a.channels() {
                let d = a.get(u, v, c) as f64 - b.get(u, v, c) as f64;
                s += d * d;
                n += 1;
            }
        }
    }
    s / n as f64
}

pub fn psnr(a: &Image, b: &Image) -> f64 {
    let m = mse(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    }
}

fn luma_at(img: &Image, u: usize, v: usize) -> f64 {
    if img.channels() == 1 {
        img.get(u, v, 0) as f64
    } else {
        0.299 * img.get(u, v, 0) as f64 + 0.587 * img.get(u, v, 1) as f64 + 0.114 * img.get(u, v, 2) as f64
    }
}

/// SSIM evaluated window by window with a full 2-D Gaussian kernel.
pub fn ssim(a: &Image, b: &Image) -> f64 {
    const K: usize = 11;
    let sigma = 1.5f64;
    let mut kernel = [[0.0f64; K]; K];
    let mut total = 0.0;
    for (j, row) in kernel.iter_mut().enumerate() {
        for (i, k) in row.iter_mut().enumerate() {
            let (x, y) = (i as f64 - 5.0, j as f64 - 5.0);
            *k = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            total += *k;
        }
    }
    let (c1, c2) = (0.0001, 0.0009);
    let mut sum = 0.0;
    let mut count = 0;
    for v0 in 0..=a.height() - K {
        for u0 in 0..=a.width() - K {
            let (mut mx, mut my) = (0.0, 0.0);
            for j in 0..K {
                for i in 0..K {
                    let w = kernel[j][i] / total;
                    mx += w * luma_at(a, u0 + i, v0 + j);
                    my += w * luma_at(b, u0 + i, v0 + j);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for j in 0..K {
                for i in 0..K {
                    let w = kernel[j][i] / total;
                    let dx = luma_at(a, u0 + i, v0 + j) - mx;
                    let dy = luma_at(b, u0 + i, v0 + j) - my;
                    vx += w * dx * dx;
                    vy += w * dy * dy;
                    cxy += w * dx * dy;
                }
            }
            sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    sum / count as f64
}

/// Fréchet distance between two diagonal Gaussians.
pub fn frechet_diagonal(mu_a: &[f64], sd_a: &[f64], mu_b: &[f64], sd_b: &[f64]) -> f64 {
    (0..mu_a.len())
        .map(|k| (mu_a[k] - mu_b[k]).powi(2) + (sd_a[k] - sd_b[k]).powi(2))
        .sum()
}

/// Mean and unbiased covariance of row vectors.
pub fn moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    let cov = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    (mean, cov)
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    (0..d).map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().copied().chain((0..d).map(|j| f64::from(u8::from(i == j)))).collect())
        .collect();
    for c in 0..d {
        let p = (c..d).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let pv = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= pv);
        for r in 0..d {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                m[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    m.into_iter().map(|r| r[d..].to_vec()).collect()
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^½)` with the square root of the
/// non-symmetric product taken by Denman-Beavers iteration.
pub fn frechet_from_samples(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let ((ma, ca), (mb, cb)) = (moments(a), moments(b));
    let d = ma.len();
    let mut y = matmul(&ca, &cb);
    let mut z: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..60 {
        let (yi, zi) = (inverse(&y), inverse(&z));
        let avg = |p: &[Vec<f64>], q: &[Vec<f64>]| -> Vec<Vec<f64>> {
            p.iter().zip(q).map(|(r, s)| r.iter().zip(s).map(|(x, w)| 0.5 * (x + w)).collect()).collect()
        };
        (y, z) = (avg(&y, &zi), avg(&z, &yi));
    }
    let mean_term: f64 = ma.iter().zip(&mb).map(|(x, w)| (x - w).powi(2)).sum();
    mean_term + (0..d).map(|k| ca[k][k] + cb[k][k] - 2.0 * y[k][k]).sum::<f64>()
}
