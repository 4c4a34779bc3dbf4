//! Seeded random streams.
//!
//! Every random draw in the crate comes from a `ChaCha20` keystream
//! (`rand_chacha::ChaCha20Rng`, seeded with `seed_from_u64(seed)` and
//! positioned on stream `stream`). Conversions from raw 64-bit words are
//! done here rather than through `rand_distr`, so that a seed means the
//! same thing to any implementation that follows these rules:
//!
//! * uniform `[0, 1)`: `(word >> 11) * 2^-53`
//! * standard normal: Box-Muller on two consecutive uniforms,
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` (the sine branch is discarded)
//! * index below `m`: `word % m`
//!
//! This is generator version 1 (`GENERATOR_NAME`).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const GENERATOR_NAME: &str = "chacha20-boxmuller-v1";

pub struct Stream {
    inner: ChaCha20Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Stream { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn index_below(&mut self, m: usize) -> usize {
        (self.next_u64() % m as u64) as usize
    }

    /// Fisher-Yates shuffle driven by `index_below`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index_below(i + 1);
            items.swap(i, j);
        }
    }
}
