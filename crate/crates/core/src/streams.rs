//! Counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha stream addressed by
//! `(seed, purpose, step, index)`, so the values a candidate sees do not
//! depend on evaluation order or on how many workers share the batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// What a stream is used for. Occupies the top byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Init = 1,
    Candidate = 2,
    BackwardNoise = 3,
    Baseline = 4,
    Planner = 5,
    Dataset = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Independent generator for `(purpose, step, index)`.
    ///
    /// `step` must fit in 24 bits and `index` in 32 bits.
    pub fn rng(&self, purpose: Purpose, step: usize, index: usize) -> ChaCha8Rng {
        debug_assert!(step < (1 << 24) && (index as u64) < (1u64 << 32));
        let stream = ((purpose as u64) << 56) | ((step as u64) << 32) | index as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// `n` standard normal draws from one stream.
    pub fn normals(&self, purpose: Purpose, step: usize, index: usize, n: usize) -> Vec<f64> {
        let mut rng = self.rng(purpose, step, index);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}
