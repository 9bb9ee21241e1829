//! Graph-convolutional LSTM cell.
//!
//! Every gate shares the propagated node features `P·Z`, where `P` is the
//! normalized adjacency and `Z = [x | h]` stacks the scalar input of each node
//! with its hidden state.

use serde::{Deserialize, Serialize};

use super::params::GclstmParams;
use crate::error::{ensure_dims, Result};
use crate::numerics::{sigmoid, Matrix};

/// Cell and hidden state, both `n×d_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub c: Matrix,
    pub h: Matrix,
}

impl LstmState {
    pub fn zeros(n: usize, d_h: usize) -> Self {
        Self {
            c: Matrix::zeros(n, d_h),
            h: Matrix::zeros(n, d_h),
        }
    }

    /// Hidden state flattened node-major, the feature vector used for T².
    pub fn hidden_flat(&self) -> Vec<f64> {
        self.h.as_slice().to_vec()
    }
}

/// Intermediates of one cell step kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    z: Matrix,
    pz: Matrix,
    f: Matrix,
    i: Matrix,
    o: Matrix,
    g: Matrix,
    c_prev: Matrix,
    tanh_c: Matrix,
}

/// Gradients flowing out of a cell step to its inputs.
pub(crate) struct StepInputGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Matrix,
    pub dc_prev: Matrix,
}

pub(crate) fn step_forward(
    x: &[f64],
    prev: &LstmState,
    prop: &Matrix,
    p: &GclstmParams,
) -> Result<(LstmState, StepCache)> {
    let n = prop.rows();
    let d_h = p.d_h();
    ensure_dims!(x.len() == n, "input of {} values for {} nodes", x.len(), n);
    ensure_dims!(
        prev.h.shape() == (n, d_h) && prev.c.shape() == (n, d_h),
        "state shape {:?} for n={}, d_h={}",
        prev.h.shape(),
        n,
        d_h
    );
    let x_col = Matrix::from_vec(n, 1, x.to_vec())?;
    let z = Matrix::hcat(&[&x_col, &prev.h])?;
    let pz = prop.matmul(&z)?;
    let pre = |k: usize| -> Result<Matrix> {
        let mut m = pz.matmul(&p.weights[k])?;
        m.add_row_broadcast(p.biases[k].as_slice())?;
        Ok(m)
    };
    let f = pre(0)?.map(sigmoid);
    let i = pre(1)?.map(sigmoid);
    let o = pre(2)?.map(sigmoid);
    let g = pre(3)?.map(f64::tanh);
    let c = f.hadamard(&prev.c)?.add(&i.hadamard(&g)?)?;
    let tanh_c = c.map(f64::tanh);
    let h = o.hadamard(&tanh_c)?;
    let cache = StepCache {
        z,
        pz,
        f,
        i,
        o,
        g,
        c_prev: prev.c.clone(),
        tanh_c,
    };
    Ok((LstmState { c, h }, cache))
}

/// Backward through one step. Parameter gradients are accumulated into
/// `grads`; the gradient w.r.t. the propagation matrix into `dprop`.
pub(crate) fn step_backward(
    cache: &StepCache,
    prop: &Matrix,
    p: &GclstmParams,
    dh: &Matrix,
    dc_next: &Matrix,
    grads: &mut GclstmParams,
    dprop: &mut Matrix,
) -> Result<StepInputGrads> {
    let (n, d_h) = dh.shape();
    let mut dpre: [Matrix; 4] = std::array::from_fn(|_| Matrix::zeros(n, d_h));
    let mut dc_prev = Matrix::zeros(n, d_h);
    for r in 0..n {
        for c in 0..d_h {
            let idx = (r, c);
            let (f, i, o, g) = (cache.f[idx], cache.i[idx], cache.o[idx], cache.g[idx]);
            let tc = cache.tanh_c[idx];
            let d_o = dh[idx] * tc;
            let dc = dc_next[idx] + dh[idx] * o * (1.0 - tc * tc);
            let d_f = dc * cache.c_prev[idx];
            let d_i = dc * g;
            let d_g = dc * i;
            dc_prev[idx] = dc * f;
            dpre[0][idx] = d_f * f * (1.0 - f);
            dpre[1][idx] = d_i * i * (1.0 - i);
            dpre[2][idx] = d_o * o * (1.0 - o);
            dpre[3][idx] = d_g * (1.0 - g * g);
        }
    }
    let mut dpz = Matrix::zeros(n, 1 + d_h);
    for k in 0..4 {
        grads.weights[k].axpy(1.0, &cache.pz.t_matmul(&dpre[k])?)?;
        let bias_grad = dpre[k].col_sums();
        for (b, d) in grads.biases[k].as_mut_slice().iter_mut().zip(bias_grad) {
            *b += d;
        }
        dpz.axpy(1.0, &dpre[k].matmul_t(&p.weights[k])?)?;
    }
    dprop.axpy(1.0, &dpz.matmul_t(&cache.z)?)?;
    let dz = prop.t_matmul(&dpz)?;
    Ok(StepInputGrads {
        dx: dz.col(0),
        dh_prev: dz.slice_cols(1, 1 + d_h),
        dc_prev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::ParamSet;
    use crate::numerics::{sym_normalize, tanh};

    /// Straight-line per-node evaluation of the gate equations.
    fn oracle_step(x: &[f64], prev: &LstmState, a: &Matrix, p: &GclstmParams) -> LstmState {
        let n = x.len();
        let d_h = p.d_h();
        let prop = sym_normalize(a).unwrap();
        let mut c = Matrix::zeros(n, d_h);
        let mut h = Matrix::zeros(n, d_h);
        for node in 0..n {
            for u in 0..d_h {
                let mut pre = [0.0; 4];
                for (gate, out) in pre.iter_mut().enumerate() {
                    let mut acc = p.biases[gate][(0, u)];
                    for j in 0..n {
                        let mut feat = x[j] * p.weights[gate][(0, u)];
                        for k in 0..d_h {
                            feat += prev.h[(j, k)] * p.weights[gate][(1 + k, u)];
                        }
                        acc += prop[(node, j)] * feat;
                    }
                    *out = acc;
                }
                let f = 1.0 / (1.0 + (-pre[0]).exp());
                let i = 1.0 / (1.0 + (-pre[1]).exp());
                let o = 1.0 / (1.0 + (-pre[2]).exp());
                let g = tanh(pre[3]);
                c[(node, u)] = f * prev.c[(node, u)] + i * g;
                h[(node, u)] = o * tanh(c[(node, u)]);
            }
        }
        LstmState { c, h }
    }

    fn random_params(d_h: usize, seed: u64) -> GclstmParams {
        let mut p = GclstmParams::zeros(d_h);
        let mut s = seed as f64;
        let flat: Vec<f64> = (0..p.num_params())
            .map(|_| {
                s = (s * 9301.0 + 49297.0) % 233280.0;
                s / 233280.0 - 0.5
            })
            .collect();
        p.assign_flat(&flat).unwrap();
        p
    }

    #[test]
    fn zero_params_zero_state() {
        let p = GclstmParams::zeros(2);
        let prev = LstmState::zeros(3, 2);
        let a = Matrix::filled(3, 3, 0.3);
        let prop = sym_normalize(&a).unwrap();
        let (s, cache) = step_forward(&[1.0, -2.0, 0.5], &prev, &prop, &p).unwrap();
        assert!(cache.f.as_slice().iter().all(|&v| v == 0.5));
        assert!(cache.o.as_slice().iter().all(|&v| v == 0.5));
        assert_eq!(s.c, Matrix::zeros(3, 2));
        assert_eq!(s.h, Matrix::zeros(3, 2));
    }

    #[test]
    fn zero_params_halve_cell_state() {
        let p = GclstmParams::zeros(2);
        let c0 = Matrix::from_rows(&[&[1.0, -2.0], &[0.4, 3.0]]);
        let prev = LstmState {
            c: c0.clone(),
            h: Matrix::zeros(2, 2),
        };
        let prop = sym_normalize(&Matrix::zeros(2, 2)).unwrap();
        let (s, _) = step_forward(&[0.7, 0.1], &prev, &prop, &p).unwrap();
        assert!(s.c.max_abs_diff(&c0.scale(0.5)) < 1e-15);
        let expected_h = c0.map(|v| 0.5 * (0.5 * v).tanh());
        assert!(s.h.max_abs_diff(&expected_h) < 1e-15);
    }

    #[test]
    fn matches_oracle() {
        let n = 4;
        let p = random_params(3, 17);
        let a = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        let prev = LstmState {
            c: Matrix::from_fn(n, 3, |i, j| (i as f64 - j as f64) * 0.3),
            h: Matrix::from_fn(n, 3, |i, j| ((i + j) as f64 * 0.2).sin()),
        };
        let x = [0.5, -1.2, 0.3, 2.0];
        let prop = sym_normalize(&a).unwrap();
        let (s, _) = step_forward(&x, &prev, &prop, &p).unwrap();
        let o = oracle_step(&x, &prev, &a, &p);
        assert!(s.c.max_abs_diff(&o.c) < 1e-12);
        assert!(s.h.max_abs_diff(&o.h) < 1e-12);
        assert!(s.h.max_abs() < 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let p = GclstmParams::zeros(2);
        let prop = Matrix::identity(3);
        assert!(step_forward(&[1.0], &LstmState::zeros(3, 2), &prop, &p).is_err());
        assert!(step_forward(&[1.0; 3], &LstmState::zeros(2, 2), &prop, &p).is_err());
    }
}
