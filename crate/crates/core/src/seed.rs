//! Counter-based seed derivation.
//!
//! All randomness in the crate is keyed by `(master seed, tags...)` so that
//! results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a path of tags.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for &t in tags {
        h = splitmix(h ^ splitmix(t.wrapping_add(GOLDEN)));
    }
    h
}

/// A uniform draw in `[0, 1)` addressed by `(master, tags)`.
#[inline]
pub fn uniform(master: u64, tags: &[u64]) -> f64 {
    (derive(master, tags) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A stream RNG addressed by `(master, tags)`.
pub fn rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tags))
}
