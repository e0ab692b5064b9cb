//! Fréchet distance between Gaussian fits of two feature sets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Ridge added to covariances estimated from `n ≤ d` samples.
pub const SHRINKAGE: f64 = 1e-6;
/// Relative tolerance below zero for eigenvalues treated as round-off.
pub const EIGEN_CLAMP: f64 = 1e-8;

/// `n × d` row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub extractor: String,
    pub dim: usize,
    pub rows: Vec<f64>,
}

impl FeatureSet {
    pub fn new(extractor: impl Into<String>, dim: usize) -> Self {
        Self {
            extractor: extractor.into(),
            dim,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::FeatureDimMismatch(self.dim, v.len()));
        }
        self.rows.extend_from_slice(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.rows.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean and unbiased covariance; the flag reports ridge shrinkage.
    fn moments(&self) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let (n, d) = (self.len(), self.dim);
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; d * d];
        let mut centred = vec![0.0; d];
        for i in 0..n {
            for (c, (x, m)) in centred.iter_mut().zip(self.row(i).iter().zip(&mean)) {
                *c = x - m;
            }
            for r in 0..d {
                let cr = centred[r];
                for c in r..d {
                    cov[r * d + c] += cr * centred[c];
                }
            }
        }
        for r in 0..d {
            for c in r..d {
                let v = cov[r * d + c] / (n as f64 - 1.0);
                cov[r * d + c] = v;
                cov[c * d + r] = v;
            }
        }
        let shrunk = n <= d;
        if shrunk {
            for k in 0..d {
                cov[k * d + k] += SHRINKAGE;
            }
        }
        Ok((mean, cov, shrunk))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetResult {
    pub distance: f64,
    pub shrinkage_applied: bool,
}

/// Eigenvalues and column eigenvectors of a symmetric `d × d` matrix by
/// cyclic Jacobi rotations.
pub fn symmetric_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for k in 0..d {
        v[k * d + k] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|r| (0..d).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| m[r * d + c] * m[r * d + c])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p * d + p], m[q * d + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * akp - s * akq;
                    m[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * apk - s * aqk;
                    m[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|k| m[k * d + k]).collect(), v)
}

fn clamp_eigen(values: &mut [f64]) -> Result<()> {
    let top = values.iter().copied().fold(0.0, f64::max);
    let floor = -EIGEN_CLAMP * top.max(1.0);
    for l in values.iter_mut() {
        if *l < 0.0 {
            if *l < floor {
                return Err(Error::IndefiniteCovariance(*l));
            }
            *l = 0.0;
        }
    }
    Ok(())
}

/// Symmetric PSD square root `Q diag(√λ) Qᵀ`.
fn sqrt_psd(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let (mut vals, vecs) = symmetric_eigen(a, d);
    clamp_eigen(&mut vals)?;
    let roots: Vec<f64> = vals.iter().map(|&l| sqrt(l)).collect();
    let mut out = vec![0.0; d * d];
    for r in 0..d {
        for c in r..d {
            let s: f64 = (0..d).map(|k| vecs[r * d + k] * roots[k] * vecs[c * d + k]).sum();
            out[r * d + c] = s;
            out[c * d + r] = s;
        }
    }
    Ok(out)
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for r in 0..d {
        for k in 0..d {
            let ark = a[r * d + k];
            for c in 0..d {
                out[r * d + c] += ark * b[k * d + c];
            }
        }
    }
    out
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)`.
pub fn frechet_distance(a: &FeatureSet, b: &FeatureSet) -> Result<FrechetResult> {
    if a.dim != b.dim {
        return Err(Error::FeatureDimMismatch(a.dim, b.dim));
    }
    let d = a.dim;
    let (ma, ca, sa) = a.moments()?;
    let (mb, cb, sb) = b.moments()?;
    let mean_term: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let trace = |m: &[f64]| (0..d).map(|k| m[k * d + k]).sum::<f64>();
    let root_a = sqrt_psd(&ca, d)?;
    let mut inner = matmul(&matmul(&root_a, &cb, d), &root_a, d);
    // symmetrize away round-off before the eigen solve
    for r in 0..d {
        for c in r + 1..d {
            let s = 0.5 * (inner[r * d + c] + inner[c * d + r]);
            inner[r * d + c] = s;
            inner[c * d + r] = s;
        }
    }
    let (mut vals, _) = symmetric_eigen(&inner, d);
    clamp_eigen(&mut vals)?;
    let tr_sqrt: f64 = vals.iter().map(|&l| sqrt(l)).sum();
    let distance = (mean_term + trace(&ca) + trace(&cb) - 2.0 * tr_sqrt).max(0.0);
    Ok(FrechetResult {
        distance,
        shrinkage_applied: sa || sb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, stream, Stream};

    fn gaussian_set(seed: u64, n: usize, d: usize, mean: &[f64], scale: &[f64]) -> FeatureSet {
        let mut rng = stream(seed, Stream::Fixture);
        let mut set = FeatureSet::new("test", d);
        for _ in 0..n {
            let v: Vec<f64> = (0..d).map(|k| mean[k] + scale[k] * normal(&mut rng)).collect();
            set.push(&v).unwrap();
        }
        set
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for r in 0..3 {
            for c in 0..3 {
                let s: f64 = (0..3).map(|k| vecs[r * 3 + k] * vals[k] * vecs[c * 3 + k]).sum();
                assert!((s - a[r * 3 + c]).abs() < 1e-12);
            }
        }
        let tr: f64 = vals.iter().sum();
        assert!((tr - 8.0).abs() < 1e-12);
    }

    #[test]
    fn identical_sets_are_zero() {
        let a = gaussian_set(1, 200, 8, &[0.0; 8], &[1.0; 8]);
        let r = frechet_distance(&a, &a).unwrap();
        assert!(r.distance < 1e-8, "{}", r.distance);
        assert!(!r.shrinkage_applied);
    }

    #[test]
    fn mean_shift_with_identity_covariance() {
        let d = 4;
        let mu = [3.0, -2.0, 1.0, 4.0];
        let a = gaussian_set(2, 20_000, d, &[0.0; 4], &[1.0; 4]);
        let b = gaussian_set(3, 20_000, d, &mu, &[1.0; 4]);
        let expect: f64 = mu.iter().map(|m| m * m).sum();
        let got = frechet_distance(&a, &b).unwrap().distance;
        assert!((got - expect).abs() / expect < 0.05, "{got} vs {expect}");
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = gaussian_set(4, 100, 6, &[0.0; 6], &[1.0, 2.0, 0.5, 1.0, 1.0, 3.0]);
        let b = gaussian_set(5, 120, 6, &[0.5; 6], &[1.5; 6]);
        let ab = frechet_distance(&a, &b).unwrap().distance;
        let ba = frechet_distance(&b, &a).unwrap().distance;
        assert!((ab - ba).abs() < 1e-8);
    }

    #[test]
    fn shrinkage_and_errors() {
        let a = gaussian_set(6, 5, 8, &[0.0; 8], &[1.0; 8]);
        let b = gaussian_set(7, 50, 8, &[0.0; 8], &[1.0; 8]);
        assert!(frechet_distance(&a, &b).unwrap().shrinkage_applied);
        let c = gaussian_set(8, 50, 4, &[0.0; 4], &[1.0; 4]);
        assert_eq!(frechet_distance(&a, &c), Err(Error::FeatureDimMismatch(8, 4)));
        let one = gaussian_set(9, 1, 4, &[0.0; 4], &[1.0; 4]);
        assert_eq!(frechet_distance(&one, &c), Err(Error::TooFewSamples(1)));
        let mut neg = [1.0, 0.0, 0.0, -0.5];
        assert!(matches!(clamp_eigen(&mut neg), Err(Error::IndefiniteCovariance(_))));
        let mut tiny = [1.0, -1e-12];
        clamp_eigen(&mut tiny).unwrap();
        assert_eq!(tiny, [1.0, 0.0]);
    }
}
