//! Seeded generator shared by every stochastic step.
//!
//! Draws go through [`SimRng::next_unit`], which takes the top 53 bits of
//! one `u64` from ChaCha8 (seeded with `seed_from_u64`) and scales them into
//! `[0, 1)`. Weighted choices are inverse-CDF scans over that value, so any
//! implementation with the same ChaCha8 stream reproduces a run exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Recorded in run outputs so a trace names the stream that produced it.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/u53-inverse-cdf";

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Picks an index with probability proportional to its weight.
    ///
    /// Returns `None` when no weight is positive.
    pub fn weighted_index(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if total <= 0.0 {
            return None;
        }
        let target = self.next_unit() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(i);
            if target < acc {
                return Some(i);
            }
        }
        // Rounding can leave target just above the final partial sum.
        last
    }

    /// Short hex digest of the seed and stream position.
    pub fn state_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.inner.get_word_pos().to_le_bytes());
        let out = h.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
