//! Seed expansion.
//!
//! A single top-level seed is split into independent per-purpose streams by
//! hashing `(seed, tag)` with SplitMix64 finalization. Adding a new purpose
//! never perturbs the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for `tag` from `seed`.
// Kept out of line: inlined into loops over constant tags it sends the
// optimizer into a pathological compile (observed with rustc 1.97).
#[inline(never)]
pub fn derive(seed: u64, tag: &str) -> u64 {
    let mut h = splitmix64(seed);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Derive a child seed for the `index`-th member of a family.
pub fn derive_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive(seed, tag) ^ splitmix64(index))
}

pub fn rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}
