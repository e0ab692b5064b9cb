//! Per-modality aggregation of per-image metrics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::features::{extract_features, perceptual_proxy, Extractor, FEATURE_DIM};
use super::frechet::{frechet_distance, FeatureSet};
use super::{mse, psnr_from_mse, ssim};
use crate::error::Result;
use crate::geometry::SensorModality;
use crate::image::Image;
use crate::math::sqrt;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Non-finite values serialize as the strings `"inf"`, `"-inf"`, `"nan"`.
mod lenient_f64 {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> core::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    #[serde(with = "lenient_f64")]
    pub mean: f64,
    /// Population standard deviation.
    #[serde(with = "lenient_f64")]
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: sqrt(var),
        }
    }

    /// Like [`MeanStd::of`] over the finite values; all-infinite input
    /// yields `+∞ ± 0`.
    pub fn of_psnr(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() && !values.is_empty() {
            return Self {
                mean: f64::INFINITY,
                std: 0.0,
            };
        }
        Self::of(&finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub perceptual: f64,
}

impl PairMetrics {
    pub fn compute(reference: &Image, candidate: &Image) -> Result<Self> {
        let m = mse(reference, candidate)?;
        Ok(Self {
            mse: m,
            psnr: psnr_from_mse(m, 1.0),
            ssim: ssim(reference, candidate)?,
            perceptual: perceptual_proxy(reference, candidate),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityStats {
    pub count: usize,
    pub mse: MeanStd,
    pub psnr: MeanStd,
    /// Pairs with identical images (PSNR = +∞), excluded from `psnr`.
    pub psnr_infinite: usize,
    pub ssim: MeanStd,
    pub perceptual_proxy: MeanStd,
    pub frechet: Option<f64>,
    pub frechet_shrinkage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub extractor: String,
    pub modalities: BTreeMap<SensorModality, ModalityStats>,
    pub corpus_frechet: Option<f64>,
    pub partial: bool,
    pub missing: Vec<String>,
}

/// One evaluated (reference, generated) pair.
pub struct Evaluated {
    pub modality: SensorModality,
    pub metrics: PairMetrics,
    pub reference_features: Vec<f64>,
    pub generated_features: Vec<f64>,
}

impl Evaluated {
    pub fn compute(modality: SensorModality, reference: &Image, generated: &Image, extractor: Extractor) -> Result<Self> {
        Ok(Self {
            modality,
            metrics: PairMetrics::compute(reference, generated)?,
            reference_features: extract_features(reference, extractor),
            generated_features: extract_features(generated, extractor),
        })
    }
}

fn frechet_of(items: &[&Evaluated], extractor: Extractor) -> Result<(Option<f64>, bool)> {
    if items.len() < 2 {
        return Ok((None, false));
    }
    let mut real = FeatureSet::new(extractor.id(), FEATURE_DIM);
    let mut fake = FeatureSet::new(extractor.id(), FEATURE_DIM);
    for e in items {
        real.push(&e.reference_features)?;
        fake.push(&e.generated_features)?;
    }
    let r = frechet_distance(&real, &fake)?;
    Ok((Some(r.distance), r.shrinkage_applied))
}

impl MetricReport {
    /// Aggregate pairs in the given order (the fixed reduction order).
    pub fn build(items: &[Evaluated], missing: Vec<String>, extractor: Extractor) -> Result<Self> {
        let mut modalities = BTreeMap::new();
        for m in SensorModality::ALL {
            let group: Vec<&Evaluated> = items.iter().filter(|e| e.modality == m).collect();
            if group.is_empty() {
                continue;
            }
            let col = |f: fn(&PairMetrics) -> f64| group.iter().map(|e| f(&e.metrics)).collect::<Vec<f64>>();
            let psnr = col(|p| p.psnr);
            let (frechet, frechet_shrinkage) = frechet_of(&group, extractor)?;
            modalities.insert(
                m,
                ModalityStats {
                    count: group.len(),
                    mse: MeanStd::of(&col(|p| p.mse)),
                    psnr: MeanStd::of_psnr(&psnr),
                    psnr_infinite: psnr.iter().filter(|v| v.is_infinite()).count(),
                    ssim: MeanStd::of(&col(|p| p.ssim)),
                    perceptual_proxy: MeanStd::of(&col(|p| p.perceptual)),
                    frechet,
                    frechet_shrinkage,
                },
            );
        }
        let all: Vec<&Evaluated> = items.iter().collect();
        let (corpus_frechet, _) = frechet_of(&all, extractor)?;
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            extractor: extractor.id().into(),
            modalities,
            corpus_frechet,
            partial: !missing.is_empty(),
            missing,
        })
    }

    /// Fixed-width table: one row per metric, one column per modality.
    pub fn to_table(&self) -> String {
        let fmt_ms = |m: &MeanStd, digits: usize| {
            if m.mean.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.*} ± {:.*}", digits, m.mean, digits, m.std)
            }
        };
        let mods: Vec<(&SensorModality, &ModalityStats)> = self.modalities.iter().collect();
        let mut out = format!("{:<18}", "metric");
        for (m, _) in &mods {
            out += &format!("{:>22}", m.name());
        }
        out.push('\n');
        type Row<'a> = (&'a str, &'a dyn Fn(&ModalityStats) -> String);
        let rows: [Row; 6] = [
            ("n", &|s| s.count.to_string()),
            ("MSE", &|s| fmt_ms(&s.mse, 5)),
            ("PSNR (dB)", &|s| fmt_ms(&s.psnr, 2)),
            ("SSIM", &|s| fmt_ms(&s.ssim, 4)),
            ("perceptual-proxy", &|s| fmt_ms(&s.perceptual_proxy, 5)),
            ("Frechet", &|s| match s.frechet {
                Some(f) => format!("{f:.4}{}", if s.frechet_shrinkage { "*" } else { "" }),
                None => "-".into(),
            }),
        ];
        for (name, f) in rows {
            out += &format!("{name:<18}");
            for (_, s) in &mods {
                out += &format!("{:>22}", f(s));
            }
            out.push('\n');
        }
        if let Some(f) = self.corpus_frechet {
            out += &format!("corpus Frechet: {f:.4}\n");
        }
        if self.partial {
            out += &format!("PARTIAL: {} generated images missing\n", self.missing.len());
        }
        out
    }
}
