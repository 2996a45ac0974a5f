//! Deterministic seed derivation.
//!
//! Every random choice in the engine flows from one root seed. Stage and
//! sub-stream seeds are derived with a fixed mixing function so a single
//! recorded seed reproduces the whole experiment.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; full-avalanche 64-bit mix.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a seed with a salt value.
pub fn mix2(seed: u64, salt: u64) -> u64 {
    mix(seed ^ mix(salt))
}

/// Derive a named sub-seed from a root seed (FNV-1a over the label).
pub fn derive(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix2(root, h)
}

/// Deterministic RNG for a derived seed. ChaCha8 output is stable across
/// platforms and crate versions.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
