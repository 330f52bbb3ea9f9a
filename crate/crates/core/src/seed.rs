//! Seed derivation and generator construction.
//!
//! Every random draw in the crate comes from a `ChaCha20Rng` seeded with a
//! 64-bit value. Child seeds are derived with the SplitMix64 finalizer so that
//! one user-facing seed fans out into independent, reproducible streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the child seed number `stream` of `seed`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Derives a child seed from a path of stream indices.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |acc, &s| derive(acc, s))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream ids for the X and Y projections of a single coefficient.
pub const X_STREAM: u64 = 1;
pub const Y_STREAM: u64 = 2;
