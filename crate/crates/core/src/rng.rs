//! Deterministic random streams.
//!
//! Every consumer draws from a ChaCha8 stream keyed by
//! `(seed, module, agent, tick, item)`, so results never depend on the order
//! in which frames, agents or strategies are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Module {
    Scenario = 1,
    Flow = 2,
    Detector = 3,
    FalsePositive = 4,
    Test = 99,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Opens the stream for one `(module, agent, tick, item)` cell of `seed`.
pub fn stream(seed: u64, module: Module, agent: u64, tick: i64, item: u64) -> ChaCha8Rng {
    let key = [module as u64, agent, tick as u64, item]
        .into_iter()
        .fold(splitmix(seed), |acc, v| splitmix(acc ^ splitmix(v)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(module as u64);
    rng
}

/// Derives a child seed for one `(module, agent, tick)` cell, for APIs that
/// take a plain seed.
pub fn sub_seed(seed: u64, module: Module, agent: u64, tick: i64) -> u64 {
    [module as u64, agent, tick as u64]
        .into_iter()
        .fold(splitmix(seed ^ 0xA5A5_5A5A), |acc, v| splitmix(acc ^ splitmix(v)))
}

/// Time quantized to microseconds, used as a stream and cache key.
pub fn tick(t: f64) -> i64 {
    (t * 1e6).round() as i64
}
