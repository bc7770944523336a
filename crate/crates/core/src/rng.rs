// Copyright 2026 The grw-lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Counter-based random streams keyed by `(master_seed, stream_id)`.
//!
//! Every trajectory draws from its own ChaCha stream, so ensemble results do
//! not depend on scheduling or on the number of worker threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Stream ids at or above this offset are reserved for derived ensembles
/// (restarts, reruns) so they never collide with trajectory indices.
pub const DERIVED_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha12Rng,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self { inner }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Exponential waiting time by inverse CDF.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        -(1.0 - self.uniform()).ln() / rate
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Inverse-CDF draw from unnormalized non-negative weights.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last = k;
                acc += w;
                if u < acc {
                    return k;
                }
            }
        }
        last
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Derives a fresh master seed from a parent seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut r = StreamRng::new(seed, DERIVED_STREAM_BASE + tag);
    r.next_u64()
}
