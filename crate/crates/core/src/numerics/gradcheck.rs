use crate::error::{CgstaeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over coordinates of |analytic − numeric| / max(1, |numeric|)
    pub max_rel_error: f64,
    /// Coordinate where the maximum occurred.
    pub worst_index: usize,
    pub coordinates: usize,
}

/// Compares the analytic gradient of `f` at `params` against central finite
/// differences `(f(p+eps) − f(p−eps)) / 2eps`, one coordinate at a time.
///
/// `f` returns the loss and its analytic gradient with respect to the flat
/// parameter vector.
pub fn grad_check<F>(f: F, params: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(CgstaeError::Argument(format!(
            "finite-difference step {eps} outside [1e-6, 1e-3]"
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(CgstaeError::Numeric("non-finite parameter".into()));
    }
    let (loss, analytic) = f(params)?;
    if !loss.is_finite() {
        return Err(CgstaeError::Numeric("non-finite loss at base point".into()));
    }
    if analytic.len() != params.len() {
        return Err(CgstaeError::Dimension(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        coordinates: params.len(),
    };
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let (plus, _) = f(&probe)?;
        probe[i] = params[i] - eps;
        let (minus, _) = f(&probe)?;
        probe[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(CgstaeError::Numeric(format!(
                "non-finite loss while probing coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}
