//! Seeded random streams.
//!
//! Every stochastic component draws from ChaCha8 with a 64-bit seed. ChaCha
//! output is specified bit-for-bit, so a `(master_seed, stream)` pair yields
//! the same sequence on every platform and for every thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for the default stream of `seed`.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `master_seed`.
pub fn stream(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for trial `trial` of grid point `point`.
pub fn trial_stream(master_seed: u64, point: u32, trial: u32) -> SimRng {
    stream(master_seed, (u64::from(point) << 32) | u64::from(trial))
}
