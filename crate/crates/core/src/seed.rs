//! Deterministic derivation of RNG seeds from structured keys.

use core::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHasher;

pub type Rng = ChaCha8Rng;

/// Mixes `parts` into `base`. Stable for a given build.
pub fn derive<T: Hash + ?Sized>(base: u64, parts: &T) -> u64 {
    let mut h = FxHasher::default();
    h.write_u64(base);
    parts.hash(&mut h);
    // FxHasher leaves low bits weak; fold the high half in
    let x = h.finish();
    x ^ (x >> 29) ^ (x << 17)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
