//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from a `ChaCha8Rng`. Sweeps give task
//! `i` the stream seeded with `derive_seed(base, i)`, so results do not depend
//! on execution order or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-task `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
