//! Seedable, portable random number generator for deterministic simulation.
//!
//! The simulator needs identical fault schedules for identical seeds on every
//! platform, so it uses a fixed, documented algorithm rather than whatever a
//! general-purpose RNG crate happens to ship. The generator is SplitMix64
//! (Steele, Lea & Flood's `splitmix64` finalizer over a 64-bit Weyl
//! sequence): tiny state, full 2^64 period, and well-distributed output for
//! simulation purposes. Reports record [`GENERATOR_NAME`] in their header so
//! a run can be reproduced later.

/// Identity string recorded in report headers.
pub const GENERATOR_NAME: &str = "splitmix64";

/// SplitMix64 generator state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be non-zero.
    ///
    /// Plain modulo reduction; the bias for simulation-sized `n` is
    /// negligible and the mapping stays portable.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        self.next_u64() % n
    }

    /// Bernoulli draw with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
