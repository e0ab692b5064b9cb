//! Binary checkpoint container.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic    8 bytes  "TDIFFCK\0"
//! version  u32
//! count    u32      number of tensors
//! tensor*  u16 name length, name (UTF-8), u8 rank, u32 dims[rank],
//!          f32 data[prod(dims)]
//! meta     u64 length, JSON document
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::codec::CodecMode;
use super::params::ParamSet;
use super::schedule::ScheduleConfig;
use super::train::{Model, StageSummary, TrainConfig};
use super::unet::{Denoiser, DenoiserConfig};
use super::codec::LatentCodec;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TDIFFCK\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub codec: CodecMode,
    pub denoiser: DenoiserConfig,
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub stages: Vec<StageSummary>,
    pub total_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

fn bad(msg: &str) -> Error {
    Error::ParamMismatch(msg.to_string())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated checkpoint"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub type NamedTensor = (String, Vec<usize>, Vec<f32>);

/// Serialize parameter sets and metadata.
pub fn encode(sets: &[&ParamSet<f32>], meta: &CheckpointMeta) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count: usize = sets.iter().map(|s| s.len()).sum();
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for set in sets {
        for (_, p) in set.iter() {
            out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.push(p.shape.len() as u8);
            for &d in &p.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let json = serde_json::to_vec(meta).expect("metadata serializes");
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out
}

/// Parse the container into its tensor table and metadata.
pub fn decode(bytes: &[u8]) -> Result<(Vec<NamedTensor>, CheckpointMeta)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::ParamMismatch(alloc::format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = core::str::from_utf8(r.take(len)?).map_err(|_| bad("tensor name is not UTF-8"))?.to_string();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| bad("tensor too large"))?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        tensors.push((name, shape, data));
    }
    let len = r.u64()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(len)?).map_err(|e| Error::ParamMismatch(e.to_string()))?;
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes after metadata"));
    }
    Ok((tensors, meta))
}

impl Model<f32> {
    pub fn to_checkpoint(&self, meta: &CheckpointMeta) -> Vec<u8> {
        encode(&[&self.codec.params, &self.denoiser.params], meta)
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<(Self, CheckpointMeta)> {
        let (tensors, meta) = decode(bytes)?;
        let mut codec = LatentCodec::<f32>::new(meta.codec, 0);
        let mut denoiser = Denoiser::<f32>::new(meta.denoiser, codec.latent_shape, 0)?;
        let (c, d): (Vec<NamedTensor>, Vec<NamedTensor>) = tensors.into_iter().partition(|t| t.0.starts_with("codec."));
        codec.params.load(&c)?;
        denoiser.params.load(&d)?;
        let schedule = NoiseSchedule::linear(meta.schedule)?;
        Ok((
            Self {
                codec,
                denoiser,
                schedule,
            },
            meta,
        ))
    }
}
