//! Counter-based seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by
//! `derive_seed(parent, stream)`. The derivation is a SplitMix64 finalizer of
//! `parent + (stream + 1) * 0x9E3779B97F4A7C15`, so stream `n` of a parent seed
//! never depends on how many other streams exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_LANDMARKS: u64 = 1;
pub const STREAM_TRAJECTORY: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_INIT: u64 = 4;
pub const STREAM_RANDOM_BASELINE: u64 = 5;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Scenario seed of run `index` in a batch rooted at `root`.
///
/// Run seeds live in the stream range starting at `2^32`, disjoint from the
/// per-scenario streams above.
pub fn run_seed(root: u64, index: u64) -> u64 {
    derive_seed(root, RUN_STREAM_BASE + index)
}

pub const RUN_STREAM_BASE: u64 = 1 << 32;

pub fn stream_rng(parent: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, stream))
}
