//! Portable pseudo-random generator used for weights and fixtures.
//!
//! SplitMix64 (Steele, Lea & Flood): the state advances by the golden-ratio
//! increment `0x9E3779B97F4A7C15`, and each output is the state passed
//! through the mixer
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! with wrapping 64-bit arithmetic. Uniform doubles take the top 53 bits:
//! `(z >> 11) as f64 * 2^-53`, giving values in `[0, 1)`. Every consumer in
//! this crate draws in a documented order, so any implementation of the
//! above reproduces weights and fixtures bit-for-bit.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-scale, scale)`.
    pub fn symmetric(&mut self, scale: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * scale
    }

    /// Uniform integer in `[0, n)`. Uses a plain modulo; the bias is
    /// irrelevant for fixture sizes and keeps the draw portable.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.next_u64() % n
    }

    /// Child generator whose stream is independent of further draws on `self`.
    pub fn fork(&mut self) -> Self {
        Self::new(self.next_u64())
    }
}
