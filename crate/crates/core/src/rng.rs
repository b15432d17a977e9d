//! Seed derivation. Every stochastic quantity in the crate draws from a
//! `ChaCha8Rng` whose seed is derived from the run seed, a purpose tag and an
//! index, so results never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for derived streams.
pub mod tag {
    pub const INIT: u64 = 0x1001;
    pub const TRAIN: u64 = 0x1002;
    pub const EVAL: u64 = 0x1003;
    pub const FLOOR: u64 = 0x1004;
    pub const PHASE: u64 = 0x1005;
    pub const NTK: u64 = 0x1006;
    pub const PCA: u64 = 0x1007;
    pub const COUPLING: u64 = 0x1008;
    pub const SAMPLE: u64 = 0x1009;
}

/// Samples per Monte-Carlo shard. Fixed so that shard boundaries, and
/// therefore floating-point reduction order, depend only on the sample count.
pub const SHARD_SIZE: usize = 8192;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(tag)) ^ index)
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived(base: u64, tag: u64, index: u64) -> Rng {
    seeded(derive_seed(base, tag, index))
}

/// Splits `n` samples into `(shard_index, shard_len)` pairs.
pub fn shards(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(SHARD_SIZE))
        .map(|s| (s, SHARD_SIZE.min(n - s * SHARD_SIZE)))
        .collect()
}
