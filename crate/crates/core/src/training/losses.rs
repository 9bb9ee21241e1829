//! Reconstruction loss and the four causal-graph regularizers, each with its
//! gradient with respect to the adjacency `A`.

use std::borrow::Borrow;

use super::prior::PriorGraph;
use crate::error::{ensure_dims, Result};
use crate::numerics::{clamp_prob, Matrix, LOG_CLAMP};

/// Σ over windows and steps of ‖x̂ − x‖² (a sum, not a mean).
pub fn loss_mse(reconstructions: &[Matrix], targets: &[Matrix]) -> Result<f64> {
    ensure_dims!(
        reconstructions.len() == targets.len(),
        "{} reconstructions for {} windows",
        reconstructions.len(),
        targets.len()
    );
    let mut total = 0.0;
    for (r, t) in reconstructions.iter().zip(targets) {
        total += window_sq_error(r, t)?;
    }
    Ok(total)
}

pub(crate) fn window_sq_error(r: &Matrix, t: &Matrix) -> Result<f64> {
    ensure_dims!(r.shape() == t.shape(), "shape {:?} vs {:?}", r.shape(), t.shape());
    Ok(r.as_slice()
        .iter()
        .zip(t.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Σ_t Σ_ij |A_ij − A^(t)_ij|.
pub fn loss_invariance<M: Borrow<Matrix>>(a: &Matrix, correlation_graphs: &[M]) -> Result<f64> {
    let mut total = 0.0;
    for at in correlation_graphs {
        let at = at.borrow();
        ensure_dims!(at.shape() == a.shape(), "correlation graph shape {:?}", at.shape());
        total += a
            .as_slice()
            .iter()
            .zip(at.as_slice())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>();
    }
    Ok(total)
}

/// Subgradient of [`loss_invariance`] (zero at ties).
pub fn grad_invariance<M: Borrow<Matrix>>(a: &Matrix, correlation_graphs: &[M]) -> Result<Matrix> {
    let mut g = Matrix::zeros(a.rows(), a.cols());
    for at in correlation_graphs {
        let at = at.borrow();
        ensure_dims!(at.shape() == a.shape(), "correlation graph shape {:?}", at.shape());
        for ((gv, x), y) in g.as_mut_slice().iter_mut().zip(a.as_slice()).zip(at.as_slice()) {
            let d = x - y;
            if d > 0.0 {
                *gv += 1.0;
            } else if d < 0.0 {
                *gv -= 1.0;
            }
        }
    }
    Ok(g)
}

fn check_prior(a: &Matrix, prior: &PriorGraph) -> Result<()> {
    ensure_dims!(
        a.shape() == (prior.n(), prior.n()),
        "adjacency {:?} against prior of n={}",
        a.shape(),
        prior.n()
    );
    Ok(())
}

/// d/dp log(clamp(p)); zero where the clamp is active.
fn dlog(p: f64) -> f64 {
    if (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&p) {
        1.0 / p
    } else {
        0.0
    }
}

/// Masked cross-entropy −Σ M_ij (P_ij log A_ij + (1−P_ij) log(1−A_ij)).
pub fn loss_prior(a: &Matrix, prior: &PriorGraph) -> Result<f64> {
    check_prior(a, prior)?;
    let (m, p) = (prior.mask(), prior.values());
    let mut total = 0.0;
    for idx in 0..a.as_slice().len() {
        let mk = m.as_slice()[idx];
        if mk == 0.0 {
            continue;
        }
        let av = a.as_slice()[idx];
        let pv = p.as_slice()[idx];
        total -= mk * (pv * clamp_prob(av).ln() + (1.0 - pv) * clamp_prob(1.0 - av).ln());
    }
    Ok(total)
}

pub fn grad_prior(a: &Matrix, prior: &PriorGraph) -> Result<Matrix> {
    check_prior(a, prior)?;
    let (m, p) = (prior.mask(), prior.values());
    Ok(Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        let (mk, pv, av) = (m[(i, j)], p[(i, j)], a[(i, j)]);
        -mk * (pv * dlog(av) - (1.0 - pv) * dlog(1.0 - av))
    }))
}

/// Σ (1 − M_ij) A_ij; only knowledge-free entries are penalized.
pub fn loss_sparsity(a: &Matrix, prior: &PriorGraph) -> Result<f64> {
    check_prior(a, prior)?;
    let m = prior.mask();
    Ok(a.as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(av, mk)| (1.0 - mk) * av)
        .sum())
}

pub fn grad_sparsity(a: &Matrix, prior: &PriorGraph) -> Result<Matrix> {
    check_prior(a, prior)?;
    Ok(prior.mask().map(|mk| 1.0 - mk))
}

/// Element-wise binary entropy −Σ (A log A + (1−A) log(1−A)).
pub fn loss_discrete(a: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .map(|&av| -(av * clamp_prob(av).ln() + (1.0 - av) * clamp_prob(1.0 - av).ln()))
        .sum()
}

pub fn grad_discrete(a: &Matrix) -> Matrix {
    a.map(|av| {
        let inner = (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&av);
        if inner {
            (1.0 - av).ln() - av.ln()
        } else {
            // the clamped logs are constants; only the linear factors remain
            clamp_prob(1.0 - av).ln() - clamp_prob(av).ln()
        }
    })
}
