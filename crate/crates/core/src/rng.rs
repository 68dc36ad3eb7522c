//! Seed plumbing.
//!
//! Every randomized entry point takes a `u64` seed. Independent tasks
//! (replicates, repetitions, projections) get their own ChaCha stream so the
//! output does not depend on how rayon schedules them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed from a parent seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |acc, &i| stream(acc, i).next_u64())
}
