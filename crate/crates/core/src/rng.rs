//! Seeded, splittable random streams.
//!
//! Every stochastic operation draws from a ChaCha8 stream addressed by a base
//! seed plus a path of integer tags (for example `(seed, step, group)`), so
//! results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tag path into a single 64-bit value.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(GOLDEN)))
    })
}

/// Independent stream for `(seed, tags...)`.
///
/// The key comes from `seed` and the ChaCha stream id from the tag path, so
/// distinct paths under one seed never share keystream.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive_seed(seed, tags));
    rng
}

/// Well-known tag values so call sites stay readable.
pub mod tags {
    pub const CATEGORIES: u64 = 1;
    pub const DATASET: u64 = 2;
    pub const EPOCH: u64 = 3;
    pub const ROLLOUT: u64 = 4;
    pub const BIAS_GROUPS: u64 = 5;
    pub const SIGMA_GROUPS: u64 = 6;
}
