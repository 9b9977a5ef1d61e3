//! Seed streams shared by every stochastic component.
//!
//! All randomness in the crate flows from explicit 64-bit seeds. Sequential
//! consumers draw from [`stream`], a ChaCha8 generator keyed by a seed and a
//! stream label. Per-pixel consumers use the counter-based [`counter_u64`] so
//! that the value at a given index does not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The repo-wide generator.
pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `seed` and a label.
pub fn derive(seed: u64, label: &str) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for b in label.bytes() {
        h = mix64(h ^ u64::from(b).wrapping_mul(GOLDEN));
    }
    h
}

/// Derives a child seed from `seed` and an integer index.
pub fn derive_index(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Sequential generator for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> SimRng {
    SimRng::seed_from_u64(derive(seed, label))
}

/// Counter-based draw: a pure function of `(key, index)`.
#[inline]
pub fn counter_u64(key: u64, index: u64) -> u64 {
    mix64(key ^ mix64(index.wrapping_mul(GOLDEN).wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Uniform in the open interval (0, 1) from 53 random bits.
#[inline]
pub fn counter_unit(key: u64, index: u64) -> f64 {
    ((counter_u64(key, index) >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}
