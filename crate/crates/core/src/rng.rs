//! Counter-based seed derivation.
//!
//! Every random quantity in the crate is drawn from a stream whose seed is a
//! pure function of a root seed and a position (experiment, replicate, tree,
//! ...). Nothing depends on execution order, so results are identical for any
//! worker count.
//!
//! The derivation is `child = mix(parent ^ mix(index + GOLDEN))` where `mix`
//! is the SplitMix64 finalizer. Streams are ChaCha8 generators seeded with a
//! derived 64-bit value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator type used for all sampling streams.
pub type Stream = ChaCha8Rng;

/// SplitMix64 output function.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child `index` under `parent`.
#[inline]
pub const fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Seed reached by following `path` from `root`.
pub fn derive_path(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(root, |seed, &i| derive_seed(seed, i))
}

/// A sampling stream for `seed`.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maps 64 random bits to a uniform value in `[0, 1)` with 53-bit resolution.
#[inline]
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fixed child indices used by the Monte Carlo drivers.
pub mod lane {
    pub const DATASET: u64 = 0;
    pub const TREES: u64 = 1;
    pub const QUERIES: u64 = 2;
    pub const SELECTION: u64 = 3;
}
