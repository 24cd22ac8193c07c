//! Seeded random streams.
//!
//! Every stochastic routine draws from ChaCha8 streams. Stream `index` under
//! root seed `root` is seeded with `root ^ index`, where `index` is the linear
//! setting-tuple index for simulations and the restart number for the settings
//! search. Streams are independent of execution order, which is what makes the
//! parallel and sequential paths bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_seed(root: u64, index: u64) -> u64 {
    root ^ index
}

pub fn stream(root: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(root, index))
}

/// Root seed of repetition `run` in a seeded batch. Runs are spread with a
/// large odd multiplier so that `run_seed(root, r) ^ tuple` does not collide
/// across small `(r, tuple)` pairs.
pub fn run_seed(root: u64, run: u64) -> u64 {
    root.wrapping_add(run.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
