//! Seeded random streams.
//!
//! Everything random in the crate draws from ChaCha8 generators derived from
//! a user seed. Independent work items (replicates, permutations) get their
//! own stream number so results do not depend on execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for work item `stream` under master `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed; used to nest substreams (e.g. replicate → split).
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    substream(seed, stream).random()
}

pub fn uniform_draws<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}
