#![cfg_attr(not(feature = "std"), no_std)]
extern crate alloc;

pub mod control;
pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod image;
pub(crate) mod math;
pub mod render;
pub mod metrics;
pub mod prompts;
pub mod rng;

pub use error::{Error, Result};
