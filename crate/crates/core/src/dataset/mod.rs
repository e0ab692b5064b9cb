//! Aligned multi-modal manifests, the per-object stratified split, and the
//! procedural corpus used for desk-scale training.

pub mod fixtures;
mod synth;

pub use synth::{hex_lattice, synth_targets, SynthStyleParams};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ContactPose, SensorModality};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Partition {
    pub const SPLITS: [Partition; 3] = [Self::Train, Self::Val, Self::Test];

    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
            Self::Unassigned => "unassigned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub object_id: String,
    pub frame_id: u32,
    pub pose: ContactPose,
    pub modality: SensorModality,
    pub control_path: String,
    pub prompt_path: String,
    pub target_path: String,
    #[serde(default)]
    pub partition: Partition,
}

impl SampleRecord {
    pub fn key(&self) -> (&str, u32) {
        (&self.object_id, self.frame_id)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub objects: Vec<String>,
    pub counts: BTreeMap<SensorModality, usize>,
    #[serde(default)]
    pub ratios: Option<[f64; 3]>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub meta: ManifestMeta,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    /// Build a manifest, deriving object list and per-modality counts.
    pub fn from_records(records: Vec<SampleRecord>) -> Self {
        let mut meta = ManifestMeta::default();
        for r in &records {
            if !meta.objects.contains(&r.object_id) {
                meta.objects.push(r.object_id.clone());
            }
            *meta.counts.entry(r.modality).or_default() += 1;
        }
        Self { meta, records }
    }

    pub fn partition_counts(&self) -> BTreeMap<Partition, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.partition).or_default() += 1;
        }
        out
    }

    pub fn in_partition(&self, p: Partition) -> impl Iterator<Item = &SampleRecord> + '_ {
        self.records.iter().filter(move |r| r.partition == p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentIssue {
    PoseMismatch,
    PartitionMismatch,
    Incomplete { missing: Vec<SensorModality> },
    Duplicate(SensorModality),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentReport {
    pub issues: Vec<((String, u32), AlignmentIssue)>,
}

impl AlignmentReport {
    pub fn is_aligned(&self) -> bool {
        self.issues.is_empty()
    }

    /// Offending keys, deduplicated and sorted.
    pub fn keys(&self) -> Vec<(String, u32)> {
        let mut keys: Vec<(String, u32)> = self.issues.iter().map(|(k, _)| k.clone()).collect();
        keys.dedup();
        keys
    }
}

fn group_by_key(m: &Manifest) -> BTreeMap<(&str, u32), Vec<&SampleRecord>> {
    let mut groups: BTreeMap<(&str, u32), Vec<&SampleRecord>> = BTreeMap::new();
    for r in &m.records {
        groups.entry(r.key()).or_default().push(r);
    }
    groups
}

/// Keys whose modality records disagree on pose or partition, or that lack
/// (or repeat) a modality.
pub fn verify_alignment(m: &Manifest) -> AlignmentReport {
    let mut report = AlignmentReport::default();
    for ((obj, frame), recs) in group_by_key(m) {
        let key = || (String::from(obj), frame);
        let mut seen = [0usize; 3];
        for r in &recs {
            seen[r.modality.index()] += 1;
        }
        for mo in SensorModality::ALL {
            if seen[mo.index()] > 1 {
                report.issues.push((key(), AlignmentIssue::Duplicate(mo)));
            }
        }
        let missing: Vec<SensorModality> = SensorModality::ALL
            .into_iter()
            .filter(|mo| seen[mo.index()] == 0)
            .collect();
        if !missing.is_empty() {
            report.issues.push((key(), AlignmentIssue::Incomplete { missing }));
        }
        if recs.iter().any(|r| r.pose != recs[0].pose) {
            report.issues.push((key(), AlignmentIssue::PoseMismatch));
        }
        if recs.iter().any(|r| r.partition != recs[0].partition) {
            report.issues.push((key(), AlignmentIssue::PartitionMismatch));
        }
    }
    report
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

fn check_ratios(r: [f64; 3]) -> Result<()> {
    let ok = r.iter().all(|v| v.is_finite() && *v >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidRatios(r))
    }
}

/// Largest-remainder apportionment of `n` items; exact remainder ties are
/// broken by `rng`.
pub fn apportion<R: rand::Rng + ?Sized>(n: usize, ratios: [f64; 3], rng: &mut R) -> [usize; 3] {
    const EPS: f64 = 1e-9;
    let quota = ratios.map(|r| r * n as f64);
    let mut counts = quota.map(|q| libm::floor(q + EPS) as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.shuffle(rng);
    // stable sort keeps the shuffled order among equal remainders
    let frac = |i: usize| {
        let f = quota[i] - counts[i] as f64;
        libm::round(f.max(0.0) / EPS)
    };
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Partition (object, frame) keys per object by largest-remainder rounding
/// of `ratios`; every modality of a key lands in the same partition.
pub fn stratified_split(m: &Manifest, ratios: [f64; 3], seed: u64) -> Result<Manifest> {
    check_ratios(ratios)?;
    let report = verify_alignment(m);
    if !report.is_aligned() {
        return Err(Error::UnalignedManifest(report.keys()));
    }
    let mut per_object: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (obj, frame) in group_by_key(m).into_keys() {
        per_object.entry(obj).or_default().push(frame);
    }
    let mut rng = stream(seed, Stream::Split);
    let mut assignment: BTreeMap<(&str, u32), Partition> = BTreeMap::new();
    for (obj, mut frames) in per_object {
        let counts = apportion(frames.len(), ratios, &mut rng);
        frames.shuffle(&mut rng);
        let mut it = frames.into_iter();
        for (part, count) in Partition::SPLITS.into_iter().zip(counts) {
            for frame in it.by_ref().take(count) {
                assignment.insert((obj, frame), part);
            }
        }
    }
    let records = m
        .records
        .iter()
        .map(|r| SampleRecord {
            partition: assignment[&r.key()],
            ..r.clone()
        })
        .collect();
    let mut meta = m.meta.clone();
    meta.ratios = Some(ratios);
    meta.seed = Some(seed);
    Ok(Manifest { meta, records })
}
