//! Deterministic derivation of independent RNG streams from one run seed.
//!
//! Every randomized stage (splitting, negative sampling, initialization,
//! epoch shuffling, community detection tie-breaks, neighbor sampling,
//! synthetic generation) draws from its own stream so that changing the
//! number of draws in one stage cannot shift any other stage's randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SPLIT: u64 = 0x01;
pub const STREAM_NEGATIVE: u64 = 0x02;
pub const STREAM_INIT: u64 = 0x03;
pub const STREAM_SHUFFLE: u64 = 0x04;
pub const STREAM_COMMUNITY: u64 = 0x05;
pub const STREAM_SAMPLING: u64 = 0x06;
pub const STREAM_SYNTHETIC: u64 = 0x07;
pub const STREAM_EPIDEMIC: u64 = 0x08;

/// splitmix64 finalizer; full-period bijection on u64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapse `(seed, stream, index)` into a single stream seed.
pub fn derive(seed: u64, stream: u64, index: u64) -> u64 {
    let mut acc = splitmix64(seed);
    acc = splitmix64(acc ^ stream);
    splitmix64(acc ^ index)
}

/// RNG for one `(seed, stream, index)` triple. `index` distinguishes
/// repetitions within a stage, e.g. the layer being sampled or the epoch
/// number.
pub fn rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, index))
}
