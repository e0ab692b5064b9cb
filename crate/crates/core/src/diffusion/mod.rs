//! Desk-scale latent diffusion: codec, noise schedule, dual-conditioned
//! denoiser with a zero-initialized control branch, training and DDIM
//! sampling with classifier-free guidance.

pub mod checkpoint;
pub mod codec;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod params;
pub mod prepare;
pub mod sample;
pub mod schedule;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod unet;

pub use checkpoint::CheckpointMeta;
pub use codec::{image_to_tensor, tensor_to_image, CodecMode, LatentCodec};
pub use optim::{AdamW, AdamWConfig};
pub use params::{Grads, Param, ParamId, ParamSet};
pub use sample::{cfg_fuse, ddim_latent, ddim_sample, initial_latent, SamplerConfig};
pub use prepare::{control_tensor, example, target_tensor};
pub use schedule::{forward_noise, NoiseSchedule, ScheduleConfig};
pub use tensor::{Real, Tensor};
pub use unet::{Control, Denoiser, DenoiserConfig, TrainItem};
pub use train::{BatchExecutor, Example, LossRecord, Model, Sequential, Stage, StageConfig, StageSummary, TrainConfig, Trainer};
