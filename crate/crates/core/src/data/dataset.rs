use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::read_matrix;
use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Standard deviations at or below this are treated as degenerate.
const MIN_STD: f64 = 1e-12;

/// Per-variable z-score statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Sample mean and (n−1) standard deviation per column. Degenerate
    /// columns get std 1 and a warning.
    pub fn fit(series: &Matrix) -> Result<Self> {
        let (t, n) = series.shape();
        if t < 2 {
            return Err(CgstaeError::Argument(
                "normalization needs at least two samples".into(),
            ));
        }
        let mean: Vec<f64> = series.col_sums().as_slice().iter().map(|s| s / t as f64).collect();
        let mut std = vec![0.0; n];
        for i in 0..t {
            for (j, v) in series.row(i).iter().enumerate() {
                std[j] += (v - mean[j]).powi(2);
            }
        }
        for (j, s) in std.iter_mut().enumerate() {
            *s = (*s / (t - 1) as f64).sqrt();
            if !(*s > MIN_STD) {
                log::warn!("variable {} has (near) zero variance; using std = 1", j + 1);
                *s = 1.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, series: &Matrix) -> Result<Matrix> {
        self.check(series)?;
        Ok(Matrix::from_fn(series.rows(), series.cols(), |i, j| {
            (series[(i, j)] - self.mean[j]) / self.std[j]
        }))
    }

    pub fn invert(&self, series: &Matrix) -> Result<Matrix> {
        self.check(series)?;
        Ok(Matrix::from_fn(series.rows(), series.cols(), |i, j| {
            series[(i, j)] * self.std[j] + self.mean[j]
        }))
    }

    fn check(&self, series: &Matrix) -> Result<()> {
        if series.cols() != self.n() {
            return Err(CgstaeError::Dimension(format!(
                "series has {} variables, normalizer {}",
                series.cols(),
                self.n()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

/// A `T×n` series with variable tags, fault labelling and a normalization guard.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: Matrix,
    pub tags: Vec<String>,
    pub role: Role,
    /// first faulty row (0-based), if any
    pub onset: Option<usize>,
    normalized: bool,
}

impl Dataset {
    pub fn new(series: Matrix, tags: Vec<String>, role: Role, onset: Option<usize>) -> Result<Self> {
        if tags.len() != series.cols() {
            return Err(CgstaeError::Dimension(format!(
                "{} tags for {} variables",
                tags.len(),
                series.cols()
            )));
        }
        if let Some(o) = onset {
            if o > series.rows() {
                return Err(CgstaeError::Argument(format!(
                    "onset {o} beyond series of {} rows",
                    series.rows()
                )));
            }
        }
        Ok(Self {
            series,
            tags,
            role,
            onset,
            normalized: false,
        })
    }

    /// Loads a whitespace matrix with generic `x1..xn` tags.
    pub fn load(path: &Path, role: Role, onset: Option<usize>) -> Result<Self> {
        let series = read_matrix(path)?;
        let tags = default_tags(series.cols());
        Self::new(series, tags, role, onset)
    }

    pub fn n(&self) -> usize {
        self.series.cols()
    }

    pub fn len(&self) -> usize {
        self.series.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.series.rows() == 0
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Fits on this dataset, which must be a training split.
    pub fn fit_normalizer(&self) -> Result<Normalizer> {
        if self.role != Role::Train {
            return Err(CgstaeError::State(
                "normalization statistics must come from training data".into(),
            ));
        }
        if self.normalized {
            return Err(CgstaeError::State("dataset is already normalized".into()));
        }
        Normalizer::fit(&self.series)
    }

    pub fn normalize(&mut self, norm: &Normalizer) -> Result<()> {
        if self.normalized {
            return Err(CgstaeError::State("normalization applied twice".into()));
        }
        self.series = norm.apply(&self.series)?;
        self.normalized = true;
        Ok(())
    }

    /// Per-row fault label; all false without an onset.
    pub fn labels(&self) -> Vec<bool> {
        (0..self.len())
            .map(|t| self.onset.is_some_and(|o| t >= o))
            .collect()
    }
}

pub fn default_tags(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_gives_zero_mean_unit_std() {
        let m = Matrix::from_fn(50, 2, |i, j| (i as f64 * 0.3).sin() * (j + 1) as f64 + 4.0 * j as f64);
        let norm = Normalizer::fit(&m).unwrap();
        let z = norm.apply(&m).unwrap();
        for j in 0..2 {
            let col = z.col(j);
            let mean = col.iter().sum::<f64>() / 50.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 49.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        assert!(norm.invert(&z).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn degenerate_variable_keeps_unit_std() {
        let m = Matrix::from_fn(10, 2, |i, j| if j == 0 { 3.0 } else { i as f64 });
        let norm = Normalizer::fit(&m).unwrap();
        assert_eq!(norm.std[0], 1.0);
        assert!(norm.apply(&m).unwrap().col(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn double_normalization_is_rejected() {
        let m = Matrix::from_fn(10, 2, |i, j| (i + j) as f64 * 0.5 + (i * i) as f64);
        let mut d = Dataset::new(m, default_tags(2), Role::Train, None).unwrap();
        let norm = d.fit_normalizer().unwrap();
        d.normalize(&norm).unwrap();
        assert!(matches!(d.normalize(&norm), Err(CgstaeError::State(_))));
        assert!(d.fit_normalizer().is_err());
    }

    #[test]
    fn test_role_cannot_fit() {
        let d = Dataset::new(Matrix::zeros(5, 1), default_tags(1), Role::Test, Some(2)).unwrap();
        assert!(d.fit_normalizer().is_err());
        assert_eq!(d.labels(), vec![false, false, true, true, true]);
    }
}
