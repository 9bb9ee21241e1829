//! Dense numerics shared by the model, training and monitoring layers.

mod gradcheck;
mod kde;
mod matrix;

pub use gradcheck::{grad_check, GradCheckReport};
pub use kde::{kde_control_limit, silverman_bandwidth, KdeEstimate};
pub use matrix::Matrix;

use crate::error::{ensure_dims, CgstaeError, Result};

/// Clamp applied to every probability that enters a logarithm.
pub const LOG_CLAMP: f64 = 1e-7;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

/// Inverse of [`sigmoid`] on `p` clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]`.
pub fn logit(p: f64) -> f64 {
    let p = clamp_prob(p);
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

pub fn sigmoid_matrix(m: &Matrix) -> Matrix {
    m.map(sigmoid)
}

pub fn tanh_matrix(m: &Matrix) -> Matrix {
    m.map(tanh)
}

/// Cached pieces of `D^{-1/2}(A+I)D^{-1/2}` needed by the backward pass.
#[derive(Debug, Clone)]
pub struct SymNormalized {
    pub propagation: Matrix,
    /// `(A+I)`
    pub with_loops: Matrix,
    /// `d_i^{-1/2}` with `d_i` the row sum of `A+I`.
    pub inv_sqrt_degree: Vec<f64>,
}

/// Symmetric graph-convolution normalization `D^{-1/2}(A+I)D^{-1/2}`.
///
/// The degree of node `i` is the row sum of `A+I`; for asymmetric `A` that is
/// the out-degree under the row-source convention.
pub fn sym_normalize(a: &Matrix) -> Result<Matrix> {
    Ok(sym_normalize_cached(a)?.propagation)
}

pub fn sym_normalize_cached(a: &Matrix) -> Result<SymNormalized> {
    ensure_dims!(a.is_square(), "adjacency must be square, got {:?}", a.shape());
    let n = a.rows();
    let mut with_loops = a.clone();
    for i in 0..n {
        with_loops[(i, i)] += 1.0;
    }
    let degree = with_loops.row_sums();
    if degree.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(CgstaeError::Numeric(
            "non-positive degree in graph normalization (negative adjacency entries?)".into(),
        ));
    }
    let inv_sqrt_degree: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let propagation = Matrix::from_fn(n, n, |i, j| {
        inv_sqrt_degree[i] * with_loops[(i, j)] * inv_sqrt_degree[j]
    });
    Ok(SymNormalized {
        propagation,
        with_loops,
        inv_sqrt_degree,
    })
}

/// Pulls a gradient w.r.t. the propagation matrix back to the raw adjacency.
pub fn sym_normalize_backward(cache: &SymNormalized, grad_prop: &Matrix) -> Matrix {
    let n = cache.with_loops.rows();
    let r = &cache.inv_sqrt_degree;
    let b = &cache.with_loops;
    // dL/dd_k collects every P entry whose row or column scale involves d_k,
    // with d(d^{-1/2})/dd = -d^{-3/2}/2 = -r^3/2.
    let mut grad_degree = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let g = grad_prop[(i, j)] * b[(i, j)];
            if g == 0.0 {
                continue;
            }
            grad_degree[i] += g * r[j] * (-0.5 * r[i].powi(3));
            grad_degree[j] += g * r[i] * (-0.5 * r[j].powi(3));
        }
    }
    Matrix::from_fn(n, n, |i, j| grad_prop[(i, j)] * r[i] * r[j] + grad_degree[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_normalize(a: &Matrix) -> Matrix {
        let n = a.rows();
        let b = Matrix::from_fn(n, n, |i, j| a[(i, j)] + if i == j { 1.0 } else { 0.0 });
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            let deg: f64 = (0..n).map(|j| b[(i, j)]).sum();
            d[(i, i)] = deg.powf(-0.5);
        }
        d.matmul(&b).unwrap().matmul(&d).unwrap()
    }

    #[test]
    fn activations() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        for x in [-3.0, -0.2, 0.7, 12.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_zero_graph_is_identity() {
        let p = sym_normalize(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(p, Matrix::identity(2));
    }

    #[test]
    fn normalize_two_cycle() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let p = sym_normalize(&a).unwrap();
        for v in p.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_single_directed_edge() {
        // A+I = [[1,0],[1,1]], row degrees (1, 2)
        let a = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let p = sym_normalize(&a).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = Matrix::from_rows(&[&[1.0, 0.0], &[s, s * s]]);
        assert!(p.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn normalize_rejects_non_square() {
        assert!(matches!(
            sym_normalize(&Matrix::zeros(2, 3)),
            Err(CgstaeError::Dimension(_))
        ));
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let a = Matrix::from_rows(&[&[0.2, 0.9, 0.1], &[0.4, 0.3, 0.8], &[0.0, 0.5, 0.6]]);
        let weights = Matrix::from_fn(3, 3, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.7);
        let f = |a: &Matrix| sym_normalize(a).unwrap().hadamard(&weights).unwrap().sum();
        let cache = sym_normalize_cached(&a).unwrap();
        let analytic = sym_normalize_backward(&cache, &weights);
        let eps = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut plus = a.clone();
                plus[(i, j)] += eps;
                let mut minus = a.clone();
                minus[(i, j)] -= eps;
                let numeric = (f(&plus) - f(&minus)) / (2.0 * eps);
                assert!((numeric - analytic[(i, j)]).abs() < 1e-8);
            }
        }
    }

    fn adjacency(max_n: usize) -> impl Strategy<Value = Matrix> {
        (2..=max_n).prop_flat_map(|n| {
            prop::collection::vec(0.0f64..1.0, n * n)
                .prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn normalize_matches_brute_force(a in adjacency(6)) {
            let p = sym_normalize(&a).unwrap();
            prop_assert!(p.max_abs_diff(&brute_force_normalize(&a)) < 1e-12);
        }

        #[test]
        fn normalize_preserves_symmetry(a in adjacency(6)) {
            let sym = a.add(&a.transpose()).unwrap().scale(0.5);
            let p = sym_normalize(&sym).unwrap();
            prop_assert!(p.max_abs_diff(&p.transpose()) < 1e-15);
        }
    }
}
