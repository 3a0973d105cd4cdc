//! Seed derivation.
//!
//! All randomness descends from one root seed. Child seeds are derived by
//! hashing a label (or integer counters) into the parent seed, so adding a new
//! consumer never shifts the stream of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every sampled stream in the crate.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based hash of `(seed, a, b)`.
#[inline]
pub fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    let h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(32))
}

/// Uniform draw in the open interval (0, 1) keyed on `(seed, a, b)`.
///
/// Independent of call order, which makes augmentation reproducible no matter
/// how rows are visited.
#[inline]
pub fn uniform_open(seed: u64, a: u64, b: u64) -> f64 {
    let bits = mix(seed, a, b) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Child seed for a named component.
pub fn derive(seed: u64, label: &str) -> u64 {
    // FNV-1a keeps the label hash stable across builds and platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix(seed, h, 0)
}

/// Child seed for the `index`-th unit of a component (realization, replicate, row).
pub fn child(seed: u64, index: u64) -> u64 {
    mix(seed, 0xA076_1D64_78BD_642F, index)
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
