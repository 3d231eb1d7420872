//! Seeded randomness.
//!
//! Every run owns a [`SeededRng`] built on ChaCha8 (`rand_chacha`), whose
//! output stream is specified independently of platform and word size. A run
//! splits its seed into numbered sub-streams so that, for example, drawing
//! extra samples for a Monte-Carlo lemma check never perturbs the optimizer's
//! own sample sequence.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-stream identifiers used by the optimizer drivers.
pub mod stream {
    pub const ESTIMATOR: u64 = 0;
    pub const MATRIX: u64 = 1;
    pub const OUTPUT: u64 = 2;
    pub const MONTE_CARLO: u64 = 3;
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    /// Independent sub-stream derived from the same seed.
    pub fn fork(&self, stream: u64) -> Self {
        Self::substream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: u64) -> u64 {
        assert!(n > 0, "cannot sample from an empty index range");
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(rand_distr::StandardNormal)
    }

    pub fn inner_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seed_gives_identical_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        let xs: Vec<u64> = (0..100).map(|_| a.index(1000)).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.index(1000)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn substreams_differ() {
        let mut a = SeededRng::substream(7, 0);
        let mut b = SeededRng::substream(7, 1);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn stream_is_pinned() {
        // Guards against silent generator changes breaking CSV reproducibility.
        let mut rng = SeededRng::new(0);
        let first: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(first, [13080132717333068652, 8594738769458413623, 12896916468484187878]);
        assert_eq!(SeededRng::substream(5, 2).next_u64(), 18227308612529490622);
    }
}
