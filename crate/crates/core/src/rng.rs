//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! master seed and a purpose tag, so that changing how many numbers one stage
//! consumes never shifts another stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Latents = 1,
    Sampling = 2,
    Noise = 3,
    Splitting = 4,
    Weights = 5,
    Core = 6,
    Planted = 7,
    Queries = 8,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a sub-seed for `purpose` from `master`.
pub fn derive_seed(master: u64, purpose: Purpose) -> u64 {
    splitmix64(splitmix64(master) ^ (purpose as u64).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Derives a sub-seed for an indexed task (e.g. one of several parallel jobs).
pub fn derive_indexed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn stream(master: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose))
}
