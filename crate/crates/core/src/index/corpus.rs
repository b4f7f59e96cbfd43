//! Reproducible synthetic vectors for tests and strategy admission.
//!
//! Driven by splitmix64 so the same sequences can be regenerated outside
//! Rust: each component is `2 * (x >> 11) / 2^53 - 1`, the row is normalized
//! in f64 (sequential sum of squares) and each value rounded to f32.

use crate::embed::EmbeddingVector;

pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn next_signed(&mut self) -> f64 {
        2.0 * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 1.0
    }
}

/// `count` uniformly random unit vectors.
pub fn random_unit_vectors(seed: u64, count: usize, dim: usize) -> Vec<EmbeddingVector> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..dim).map(|_| rng.next_signed()).collect();
            EmbeddingVector::normalized(&raw).expect("nonzero random vector")
        })
        .collect()
}

/// `count` unit vectors drawn around `centers` random directions, with
/// per-component noise of amplitude `spread`. Point `i` belongs to center
/// `i % centers`.
pub fn clustered_unit_vectors(seed: u64, count: usize, dim: usize, centers: usize, spread: f64) -> Vec<EmbeddingVector> {
    let mut rng = SplitMix64::new(seed);
    let mids: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..dim).map(|_| rng.next_signed()).collect())
        .collect();
    (0..count)
        .map(|i| {
            let raw: Vec<f64> = mids[i % centers]
                .iter()
                .map(|m| m + spread * rng.next_signed())
                .collect();
            EmbeddingVector::normalized(&raw).expect("nonzero random vector")
        })
        .collect()
}
