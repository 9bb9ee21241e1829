use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Expert knowledge about one directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorEntry {
    Edge,
    NoEdge,
    Unknown,
}

/// Ternary prior adjacency; `entry(i, j)` describes the edge i → j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorGraph {
    n: usize,
    entries: Vec<PriorEntry>,
}

impl PriorGraph {
    pub fn all_unknown(n: usize) -> Self {
        Self {
            n,
            entries: vec![PriorEntry::Unknown; n * n],
        }
    }

    pub fn from_entries(n: usize, entries: Vec<PriorEntry>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(CgstaeError::Dimension(format!(
                "{} prior entries for n={}",
                entries.len(),
                n
            )));
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> PriorEntry {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: PriorEntry) {
        self.entries[i * self.n + j] = e;
    }

    pub fn entries(&self) -> &[PriorEntry] {
        &self.entries
    }

    /// `M_ij = 1` iff the entry is known.
    pub fn mask(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| {
            if self.entry(i, j) == PriorEntry::Unknown {
                0.0
            } else {
                1.0
            }
        })
    }

    /// Known edges as 1, everything else 0.
    pub fn values(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| {
            if self.entry(i, j) == PriorEntry::Edge {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn known_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| **e != PriorEntry::Unknown)
            .count()
    }

    /// Reveals a seeded random `fraction` of the entries of a binary
    /// ground-truth adjacency, leaving the rest unknown.
    pub fn reveal_from_truth(truth: &Matrix, fraction: f64, seed: u64) -> Result<Self> {
        if !truth.is_square() {
            return Err(CgstaeError::Dimension("ground truth must be square".into()));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(CgstaeError::Argument(format!("known fraction {fraction}")));
        }
        let n = truth.rows();
        let mut idx: Vec<usize> = (0..n * n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let k = (fraction * (n * n) as f64).round() as usize;
        let mut prior = Self::all_unknown(n);
        for &flat in &idx[..k] {
            let (i, j) = (flat / n, flat % n);
            let e = if truth[(i, j)] > 0.5 {
                PriorEntry::Edge
            } else {
                PriorEntry::NoEdge
            };
            prior.set(i, j, e);
        }
        Ok(prior)
    }

    /// Seeded random ternary graph with the same number of known entries as
    /// `like`, each known entry an edge with probability `edge_prob`.
    pub fn random_like(like: &PriorGraph, edge_prob: f64, seed: u64) -> Self {
        let n = like.n;
        let k = like.known_count();
        let mut idx: Vec<usize> = (0..n * n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let mut prior = Self::all_unknown(n);
        for &flat in &idx[..k] {
            let e = if rng.random::<f64>() < edge_prob {
                PriorEntry::Edge
            } else {
                PriorEntry::NoEdge
            };
            prior.entries[flat] = e;
        }
        prior
    }
}
