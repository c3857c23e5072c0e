//! Seeded ±1 random projection.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::seeding;

/// Domain tag separating projection streams from other seeded consumers.
const PROJECTION_STREAM: u64 = 0x5052_4F4A;

/// A `target_dim x input_dim` sign matrix scaled by `1/sqrt(target_dim)`.
///
/// Entries are generated row-major from a ChaCha8 stream seeded with
/// `derive_seed(&[PROJECTION_STREAM, seed, input_dim, target_dim])`. Entry `e`
/// reads bit `e % 64` of the `e / 64`-th `next_u64` word: a set bit is `-1`,
/// a clear bit `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    input_dim: usize,
    target_dim: usize,
    signs: Vec<f64>,
    scale: f64,
}

impl ProjectionMatrix {
    pub fn new(input_dim: usize, target_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::EmptyVector);
        }
        if target_dim == 0 {
            return Err(Error::InvalidConfig(
                "projection target_dim must be >= 1".into(),
            ));
        }
        let mut rng =
            seeding::stream(&[PROJECTION_STREAM, seed, input_dim as u64, target_dim as u64]);
        let total = input_dim * target_dim;
        let mut signs = Vec::with_capacity(total);
        let mut word = 0u64;
        for e in 0..total {
            if e % 64 == 0 {
                word = rng.next_u64();
            }
            let bit = (word >> (e % 64)) & 1;
            signs.push(if bit == 1 { -1.0 } else { 1.0 });
        }
        Ok(ProjectionMatrix {
            input_dim,
            target_dim,
            signs,
            scale: 1.0 / (target_dim as f64).sqrt(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// Unscaled sign entry at `(row, col)`.
    pub fn sign(&self, row: usize, col: usize) -> f64 {
        self.signs[row * self.input_dim + col]
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::dims(self.input_dim, v.len()));
        }
        Ok(self
            .signs
            .chunks_exact(self.input_dim)
            .map(|row| row.iter().zip(v).map(|(s, x)| s * x).sum::<f64>() * self.scale)
            .collect())
    }
}

/// Projects `v` onto `target_dim` dimensions with the matrix for `(seed, |v|, target_dim)`.
pub fn random_projection(v: &[f64], target_dim: usize, seed: u64) -> Result<Vec<f64>> {
    ProjectionMatrix::new(v.len(), target_dim, seed)?.apply(v)
}
