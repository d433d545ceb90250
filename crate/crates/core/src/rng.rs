//! Seeded, portable random streams.
//!
//! Every stochastic operation in this crate (weight init, noise injection,
//! collocation sampling, evolutionary search) draws from a ChaCha8 stream so
//! that results are a pure function of the seed. Normal deviates use
//! Box–Muller on the raw 64-bit stream rather than a library distribution,
//! which pins the exact values across platforms and dependency versions.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The crate-wide deterministic generator.
pub type SeedRng = ChaCha8Rng;

/// Main stream for an experiment seed.
pub fn from_seed(seed: u64) -> SeedRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of an experiment seed (used for islands and
/// other parallel components, so results do not depend on scheduling).
pub fn substream(seed: u64, index: u64) -> SeedRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw in the half-open interval [0, 1).
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    // 53 high bits -> exactly representable dyadic rational in [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in [lo, hi).
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Standard normal deviate via Box–Muller (cosine branch).
///
/// Consumes two uniforms per draw; the first is shifted into (0, 1] so the
/// logarithm is always finite.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform integer in [0, n).
pub fn below(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    // Multiply-shift rejection-free mapping is fine here: n is tiny compared
    // to 2^64 and a bias of n/2^64 is far below anything observable.
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}
