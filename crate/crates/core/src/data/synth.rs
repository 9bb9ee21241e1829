use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{default_tags, Dataset, Role};
use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// A stretch of `duration` steps with its own mechanism scaling, noise
/// scaling and additive offsets. Regimes repeat cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRegime {
    pub duration: usize,
    #[serde(default = "one")]
    pub weight_scale: f64,
    /// per-variable noise multipliers; empty means all ones
    #[serde(default)]
    pub noise_scale: Vec<f64>,
    /// per-variable constant inputs; empty means zeros
    #[serde(default)]
    pub offset: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

/// Step bias added to one variable's update from `onset` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFault {
    pub variable: usize,
    pub onset: usize,
    pub magnitude: f64,
}

/// Linear process `x_j(t+1) = a·x_j(t) + Σ_i w_ij·s·x_i(t) + offset_j + σ_j·ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub edges: Vec<SynthEdge>,
    /// number of emitted rows, including the initial state
    pub length: usize,
    #[serde(default)]
    pub noise_std: f64,
    /// self-dependence `a` on the diagonal; not part of the causal graph
    #[serde(default)]
    pub autoregression: f64,
    #[serde(default)]
    pub regimes: Vec<SynthRegime>,
    #[serde(default)]
    pub faults: Vec<SynthFault>,
    #[serde(default)]
    pub initial: Vec<f64>,
    /// discarded warm-up steps simulated in the first regime without faults
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub series: Matrix,
    /// binary i → j adjacency of the listed edges
    pub truth: Matrix,
    pub labels: Vec<bool>,
    pub onset: Option<usize>,
    pub regime: Vec<usize>,
}

impl SynthData {
    pub fn dataset(&self, role: Role) -> Result<Dataset> {
        Dataset::new(self.series.clone(), default_tags(self.series.cols()), role, self.onset)
    }
}

impl SynthSpec {
    pub fn weight_matrix(&self) -> Matrix {
        let mut w = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            w.as_mut_slice()[e.from * self.n + e.to] += e.weight;
        }
        w
    }

    pub fn truth(&self) -> Matrix {
        let mut t = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            if e.weight != 0.0 {
                t.as_mut_slice()[e.from * self.n + e.to] = 1.0;
            }
        }
        t
    }

    fn regimes(&self) -> Vec<SynthRegime> {
        if self.regimes.is_empty() {
            vec![SynthRegime {
                duration: self.length.max(1),
                weight_scale: 1.0,
                noise_scale: Vec::new(),
                offset: Vec::new(),
            }]
        } else {
            self.regimes.clone()
        }
    }

    /// Transition matrix `M` with `x(t+1) = Mᵀ x(t) + …` for a mechanism scale.
    fn transition(&self, scale: f64) -> Matrix {
        let mut m = self.weight_matrix().scale(scale);
        for j in 0..self.n {
            m.as_mut_slice()[j * self.n + j] += self.autoregression;
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CgstaeError::Argument(m));
        if self.n == 0 || self.length == 0 {
            return bad("synthetic process needs n ≥ 1 and length ≥ 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        for e in &self.edges {
            if e.from >= self.n || e.to >= self.n || !e.weight.is_finite() {
                return bad(format!("invalid edge {e:?} for n={}", self.n));
            }
        }
        if !self.initial.is_empty() && self.initial.len() != self.n {
            return bad(format!("initial state has {} entries", self.initial.len()));
        }
        for (k, r) in self.regimes().iter().enumerate() {
            if r.duration == 0 {
                return bad(format!("regime {k} has zero duration"));
            }
            for v in [&r.noise_scale, &r.offset] {
                if !v.is_empty() && v.len() != self.n {
                    return bad(format!("regime {k} vectors must have n={} entries", self.n));
                }
            }
            let rho = spectral_radius(&self.transition(r.weight_scale));
            if !(rho < 1.0) {
                return bad(format!(
                    "regime {k} is unstable: spectral radius {rho:.4} ≥ 1"
                ));
            }
        }
        for f in &self.faults {
            if f.variable >= self.n || !f.magnitude.is_finite() {
                return bad(format!("invalid fault {f:?}"));
            }
        }
        Ok(())
    }

    /// Deterministic for a given spec (including seed).
    pub fn generate(&self) -> Result<SynthData> {
        self.validate()?;
        let n = self.n;
        let regimes = self.regimes();
        let mats: Vec<Matrix> = regimes.iter().map(|r| self.transition(r.weight_scale)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut x = if self.initial.is_empty() {
            vec![0.0; n]
        } else {
            self.initial.clone()
        };
        let cycle: usize = regimes.iter().map(|r| r.duration).sum();
        let regime_at = |t: usize| {
            let mut pos = t % cycle;
            for (k, r) in regimes.iter().enumerate() {
                if pos < r.duration {
                    return k;
                }
                pos -= r.duration;
            }
            unreachable!()
        };
        for _ in 0..self.burn_in {
            x = self.advance(&x, &mats[0], &regimes[0], None, &mut rng);
        }
        let mut series = Matrix::zeros(self.length, n);
        let mut regime = Vec::with_capacity(self.length);
        series.row_mut(0).copy_from_slice(&x);
        regime.push(regime_at(0));
        for t in 1..self.length {
            let k = regime_at(t);
            x = self.advance(&x, &mats[k], &regimes[k], Some(t), &mut rng);
            series.row_mut(t).copy_from_slice(&x);
            regime.push(k);
        }
        let onset = self.faults.iter().map(|f| f.onset).min();
        let labels = (0..self.length).map(|t| onset.is_some_and(|o| t >= o)).collect();
        Ok(SynthData {
            series,
            truth: self.truth(),
            labels,
            onset: onset.map(|o| o.min(self.length)),
            regime,
        })
    }

    fn advance(
        &self,
        x: &[f64],
        m: &Matrix,
        r: &SynthRegime,
        t: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let n = self.n;
        let mut next = vec![0.0; n];
        for (i, xi) in x.iter().enumerate() {
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += m.as_slice()[i * n + j] * xi;
            }
        }
        for (j, nj) in next.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            let scale = r.noise_scale.get(j).copied().unwrap_or(1.0);
            *nj += r.offset.get(j).copied().unwrap_or(0.0) + self.noise_std * scale * eps;
        }
        if let Some(t) = t {
            for f in &self.faults {
                if t >= f.onset {
                    next[f.variable] += f.magnitude;
                }
            }
        }
        next
    }

    /// Random DAG process: `edges` edges drawn over a random topological
    /// order with weights of magnitude in [0.4, 0.9] and random sign, plus
    /// `regimes` regimes with varied noise levels, offsets and mechanism
    /// scales in [0.8, 1.2].
    pub fn random_process(
        n: usize,
        edges: usize,
        regimes: usize,
        length: usize,
        seed: u64,
    ) -> Result<Self> {
        let max_edges = n * n.saturating_sub(1) / 2;
        if edges > max_edges {
            return Err(CgstaeError::Argument(format!(
                "{edges} edges do not fit a DAG on {n} nodes"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .map(|(a, b)| (order[a], order[b]))
            .collect();
        pairs.shuffle(&mut rng);
        let mut chosen: Vec<(usize, usize)> = pairs.into_iter().take(edges).collect();
        chosen.sort_unstable();
        let edges = chosen
            .into_iter()
            .map(|(from, to)| {
                let mag = rng.random_range(0.4..0.9);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                SynthEdge {
                    from,
                    to,
                    weight: sign * mag,
                }
            })
            .collect();
        let regime_len = (length / regimes.max(1)).max(1);
        let regimes = (0..regimes)
            .map(|_| SynthRegime {
                duration: regime_len,
                weight_scale: rng.random_range(0.8..1.2),
                noise_scale: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
                offset: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        Ok(Self {
            n,
            edges,
            length,
            noise_std: 1.0,
            autoregression: 0.5,
            regimes,
            faults: Vec::new(),
            initial: Vec::new(),
            burn_in: 50,
            seed: seed.wrapping_add(1),
        })
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> f64 {
    let dm = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    dm.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
