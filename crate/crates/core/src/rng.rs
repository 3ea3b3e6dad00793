//! Seeded pseudo-random stream.
//!
//! Every sample in the crate is drawn from a 64-bit SplitMix stream
//! (Steele, Lea & Flood constants: increment `0x9e3779b97f4a7c15`, mixers
//! `0xbf58476d1ce4e5b9` and `0x94d049bb133111eb`). Conversions are fixed so
//! that other implementations can reproduce sample sets exactly:
//!
//! * `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `next_index(n)`: `floor(next_f64() * n)`, clamped to `n - 1`.
//! * `next_normal`: Box–Muller on two uniforms, `u1` replaced by `1 - u1`
//!   so the logarithm never sees zero; the cosine branch only.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct Stream {
    inner: SplitMix64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_f64() < 0.5
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Derives an independent stream for a sub-task, keyed by `tag`.
    pub fn fork(&mut self, tag: u64) -> Stream {
        Stream::new(self.next_u64() ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}
