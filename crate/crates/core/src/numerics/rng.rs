//! Counter-based standard normal streams.
//!
//! A stream is a ChaCha8 keystream selected by `(seed, stream_index)`. Normals
//! are produced in Box–Muller pairs and every pair consumes exactly two 64-bit
//! words, so draw `k` of a stream sits at a fixed keystream offset and can be
//! reached directly with [`GaussianStream::seek`].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;

/// 32-bit words consumed per Box–Muller pair.
const WORDS_PER_PAIR: u128 = 4;

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

/// Deterministic standard normal sequence for `(seed, stream_index)`.
pub fn gaussian_stream(seed: u64, stream_index: u64) -> GaussianStream {
    GaussianStream::new(seed, stream_index)
}

impl GaussianStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self { rng, spare: None }
    }

    /// Positions the stream so that the next draw is draw number `draw` (0-based).
    pub fn seek(&mut self, draw: u64) {
        let pair = (draw / 2) as u128;
        self.rng.set_word_pos(pair * WORDS_PER_PAIR);
        self.spare = None;
        if draw % 2 == 1 {
            let _ = self.next_normal();
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    /// Fills `out` with consecutive draws.
    pub fn fill(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.next_normal();
        }
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}
