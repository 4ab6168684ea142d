//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` keyed from a `u64`. Independent
//! streams are derived by mixing a base seed with a stream index, never by sharing an RNG
//! across logically separate consumers. This keeps results independent of evaluation order,
//! so parallel and serial execution agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-input stream for batched MC Dropout: `seed ^ index`.
///
/// `seed_from_u64` already diffuses its argument, so adjacent indices give unrelated streams.
pub fn per_input(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Per-rejection-fraction stream: `seed ^ mix64(q.to_bits())`.
pub fn per_fraction(seed: u64, q: f64) -> u64 {
    seed ^ mix64(q.to_bits())
}

/// Named sub-stream of a base seed (e.g. run `r` of an experiment).
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream))
}
