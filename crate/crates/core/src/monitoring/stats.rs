use nalgebra::DMatrix;

use crate::error::{ensure_dims, CgstaeError, Result};
use crate::numerics::Matrix;

/// `(h − h̄)ᵀ Σ⁻¹ (h − h̄)`.
pub fn hotelling_t2(h: &[f64], h_bar: &[f64], sigma_inv: &Matrix) -> Result<f64> {
    let d = h.len();
    ensure_dims!(
        h_bar.len() == d && sigma_inv.shape() == (d, d),
        "hidden state of {} against mean of {} and covariance {:?}",
        d,
        h_bar.len(),
        sigma_inv.shape()
    );
    let diff: Vec<f64> = h.iter().zip(h_bar).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..d {
        let row = sigma_inv.row(i);
        let s: f64 = row.iter().zip(&diff).map(|(a, b)| a * b).sum();
        q += diff[i] * s;
    }
    // round-off can leave a tiny negative value for a PD form
    Ok(q.max(0.0))
}

/// Σ_k ‖x^(k) − x̂^(k)‖² over the window.
pub fn spe_statistic(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    ensure_dims!(x.shape() == x_hat.shape(), "window {:?} vs reconstruction {:?}", x.shape(), x_hat.shape());
    Ok(x.as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Column mean and (N−1) covariance of the rows of `samples`.
pub fn mean_and_covariance(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Matrix)> {
    let n = samples.len();
    if n < 2 {
        return Err(CgstaeError::Argument("covariance needs at least two samples".into()));
    }
    let d = samples[0].len();
    ensure_dims!(samples.iter().all(|s| s.len() == d), "ragged hidden-state samples");
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    for s in samples {
        let diff: Vec<f64> = s.iter().zip(&mean).map(|(a, b)| a - b).collect();
        for i in 0..d {
            for j in i..d {
                cov.as_mut_slice()[i * d + j] += diff[i] * diff[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov.as_mut_slice()[i * d + j] = v;
            cov.as_mut_slice()[j * d + i] = v;
        }
    }
    Ok((mean, cov))
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn invert_spd(m: &Matrix) -> Result<Matrix> {
    ensure_dims!(m.is_square(), "cannot invert a {:?} matrix", m.shape());
    let d = m.rows();
    let dm = DMatrix::from_row_slice(d, d, m.as_slice());
    let chol = dm.cholesky().ok_or_else(|| {
        CgstaeError::Numeric(format!(
            "covariance ({d}×{d}, trace {:.3e}) is not positive definite",
            (0..d).map(|i| m[(i, i)]).sum::<f64>()
        ))
    })?;
    let inv = chol.inverse();
    let mut out = Matrix::from_fn(d, d, |i, j| inv[(i, j)]);
    // symmetrize round-off
    for i in 0..d {
        for j in i + 1..d {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out.as_mut_slice()[i * d + j] = v;
            out.as_mut_slice()[j * d + i] = v;
        }
    }
    if !out.is_finite() {
        return Err(CgstaeError::Numeric("covariance inverse is not finite".into()));
    }
    Ok(out)
}

/// Smallest ridge used when the covariance trace vanishes.
pub const RIDGE_FLOOR: f64 = 1e-12;

/// `Σ + ε·I` with `ε = 1e-6·trace(Σ)/dim`, floored at [`RIDGE_FLOOR`].
pub fn ridge(cov: &Matrix) -> (Matrix, f64) {
    let d = cov.rows();
    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    let eps = (1e-6 * trace / d as f64).max(RIDGE_FLOOR);
    let mut out = cov.clone();
    for i in 0..d {
        out.as_mut_slice()[i * d + i] += eps;
    }
    (out, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn t2_unit_values() {
        let id = Matrix::identity(2);
        assert_eq!(hotelling_t2(&[1.0, 2.0], &[1.0, 2.0], &id).unwrap(), 0.0);
        assert_eq!(hotelling_t2(&[4.0, 6.0], &[1.0, 2.0], &id).unwrap(), 25.0);
        assert!(hotelling_t2(&[1.0], &[1.0, 2.0], &id).is_err());
    }

    #[test]
    fn spe_unit_values() {
        let x = Matrix::from_rows(&[&[1.0], &[2.0]]);
        assert_eq!(spe_statistic(&x, &x).unwrap(), 0.0);
        assert_eq!(spe_statistic(&x, &Matrix::zeros(2, 1)).unwrap(), 5.0);
        assert!(spe_statistic(&x, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn covariance_of_known_samples() {
        let s = vec![vec![1.0, 2.0], vec![3.0, 2.0], vec![5.0, 8.0]];
        let (mean, cov) = mean_and_covariance(&s).unwrap();
        assert_eq!(mean, vec![3.0, 4.0]);
        assert_eq!(cov, Matrix::from_rows(&[&[4.0, 6.0], &[6.0, 12.0]]));
    }

    #[test]
    fn singular_covariance_is_reported() {
        let err = invert_spd(&Matrix::zeros(2, 2)).unwrap_err();
        assert_eq!(err.kind(), "numeric");
        let (r, eps) = ridge(&Matrix::zeros(2, 2));
        assert_eq!(eps, RIDGE_FLOOR);
        invert_spd(&r).unwrap();
    }

    fn spd(d: usize, vals: &[f64]) -> Matrix {
        let b = Matrix::from_fn(d, d, |i, j| vals[i * d + j]);
        let mut m = b.t_matmul(&b).unwrap();
        for i in 0..d {
            m.as_mut_slice()[i * d + i] += 0.5;
        }
        m
    }

    proptest! {
        #[test]
        fn t2_matches_dense_quadratic_form(
            vals in proptest::collection::vec(-1.0f64..1.0, 9),
            h in proptest::collection::vec(-3.0f64..3.0, 3),
            hb in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let sigma_inv = invert_spd(&spd(3, &vals)).unwrap();
            let diff = Matrix::from_vec(3, 1, h.iter().zip(&hb).map(|(a, b)| a - b).collect()).unwrap();
            let oracle = diff.t_matmul(&sigma_inv.matmul(&diff).unwrap()).unwrap()[(0, 0)];
            let t2 = hotelling_t2(&h, &hb, &sigma_inv).unwrap();
            prop_assert!(t2 >= 0.0);
            prop_assert!((t2 - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
        }

        #[test]
        fn t2_invariant_under_affine_maps(
            vals in proptest::collection::vec(-1.0f64..1.0, 9),
            map in proptest::collection::vec(-1.0f64..1.0, 9),
            shift in proptest::collection::vec(-2.0f64..2.0, 3),
            h in proptest::collection::vec(-3.0f64..3.0, 3),
            hb in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let sigma = spd(3, &vals);
            // diagonally dominant, hence invertible
            let mut l = Matrix::from_fn(3, 3, |i, j| map[i * 3 + j]);
            for i in 0..3 {
                l.as_mut_slice()[i * 3 + i] += 3.0;
            }
            let apply = |v: &[f64]| -> Vec<f64> {
                (0..3).map(|i| (0..3).map(|j| l[(i, j)] * v[j]).sum::<f64>() + shift[i]).collect()
            };
            let sigma2 = l.matmul(&sigma).unwrap().matmul_t(&l).unwrap();
            let before = hotelling_t2(&h, &hb, &invert_spd(&sigma).unwrap()).unwrap();
            let after = hotelling_t2(&apply(&h), &apply(&hb), &invert_spd(&sigma2).unwrap()).unwrap();
            prop_assert!((before - after).abs() <= 1e-8 * before.max(1.0));
        }

        #[test]
        fn spe_is_brute_force_sum(vals in proptest::collection::vec(-5.0f64..5.0, 24)) {
            let x = Matrix::from_vec(4, 3, vals[..12].to_vec()).unwrap();
            let y = Matrix::from_vec(4, 3, vals[12..].to_vec()).unwrap();
            let mut s = 0.0;
            for k in 0..4 {
                for i in 0..3 {
                    s += (x[(k, i)] - y[(k, i)]).powi(2);
                }
            }
            prop_assert!((spe_statistic(&x, &y).unwrap() - s).abs() < 1e-12);
        }
    }
}
