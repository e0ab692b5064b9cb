//! Seeded random streams.
//!
//! Every run has one `u64` seed. Components draw from named substreams of a
//! ChaCha8 generator so that, e.g., changing the number of dropout draws
//! never perturbs the split or the sampling noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Named substreams of a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split = 1,
    Init = 2,
    Noise = 3,
    Timestep = 4,
    Dropout = 5,
    Batch = 6,
    Sampling = 7,
    Fixture = 8,
    Validation = 9,
}

/// Generator for `which` substream of `seed`.
pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Generator for `which` substream of `seed`, further keyed by an index
/// (e.g. a sample id) so independent items get independent streams.
pub fn keyed_stream(seed: u64, which: Stream, key: u64) -> ChaCha8Rng {
    let mixed = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(which as u64);
    rng
}

/// Standard normal draw.
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
