//! Seeded random streams used by simulation and fold assignment.
//!
//! Determinism is a contract of this crate: for a fixed seed every run of
//! the same build produces bit-identical draws. To keep that promise
//! self-contained the generator is a splitmix64 counter stream and normal
//! variates come from the Box-Muller transform of its uniforms; nothing
//! here depends on platform RNG state.

use std::f64::consts::PI;

/// splitmix64: a 64-bit counter passed through a fixed avalanche mix.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from {0, .., bound-1} by the multiply-shift reduction.
    /// The modulo bias is below 2^-64 per draw, irrelevant at our scales.
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound >= 1);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle, driven from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// Fair coin: the top bit of the next word.
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 1 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Standard normal stream: Box-Muller on consecutive uniforms, with the
/// second variate of each pair cached. u1 is mapped into (0, 1] so the log
/// is always finite.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.next_f64();
        let u2 = self.rng.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare = Some(r * angle.sin());
        r * angle.cos()
    }
}
