use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_dims, CgstaeError, Result};
use crate::model::WindowBatch;
use crate::monitoring::{MonitorModel, StatisticTrace};
use crate::numerics::Matrix;

/// `VC_i = Σ_k (x_i^(k) − x̂_i^(k))²`; sums to the window's SPE.
pub fn variable_contribution(x: &Matrix, x_hat: &Matrix) -> Result<Vec<f64>> {
    ensure_dims!(x.shape() == x_hat.shape(), "window {:?} vs reconstruction {:?}", x.shape(), x_hat.shape());
    let mut vc = vec![0.0; x.cols()];
    for k in 0..x.rows() {
        for ((v, a), b) in vc.iter_mut().zip(x.row(k)).zip(x_hat.row(k)) {
            *v += (a - b) * (a - b);
        }
    }
    Ok(vc)
}

/// Per-index contributions; `rows[k]` belongs to series index `w − 1 + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionTrace {
    pub w: usize,
    pub rows: Vec<Vec<f64>>,
}

impl ContributionTrace {
    pub fn first_index(&self) -> usize {
        self.w - 1
    }

    pub fn at(&self, t: usize) -> Option<&[f64]> {
        t.checked_sub(self.first_index())
            .and_then(|k| self.rows.get(k))
            .map(|r| r.as_slice())
    }
}

pub fn contribution_trace(series: &Matrix, model: &MonitorModel) -> Result<ContributionTrace> {
    let w = model.dims.w;
    let batch = WindowBatch::from_series(series, w)?;
    let rows = batch
        .windows()
        .par_iter()
        .map(|x| variable_contribution(x, &model.evaluate_window(x)?.reconstruction))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContributionTrace { w, rows })
}

/// Variables whose contribution exceeds `alpha_spe` somewhere in
/// `[t_start, t_stop]`, with the first such index per variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultSet {
    pub variables: Vec<usize>,
    pub first_excess: Vec<Option<usize>>,
}

pub fn fault_variable_set(
    trace: &ContributionTrace,
    t_start: usize,
    t_stop: usize,
    alpha_spe: f64,
) -> Result<FaultSet> {
    let lo = t_start.max(trace.first_index());
    if t_start > t_stop || lo > t_stop || trace.at(lo).is_none() {
        return Err(CgstaeError::Argument(format!(
            "empty diagnosis interval [{t_start}, {t_stop}]"
        )));
    }
    let n = trace.rows[0].len();
    let mut first_excess = vec![None; n];
    for t in lo..=t_stop {
        let Some(row) = trace.at(t) else { break };
        for (i, v) in row.iter().enumerate() {
            if *v > alpha_spe && first_excess[i].is_none() {
                first_excess[i] = Some(t);
            }
        }
    }
    let variables = (0..n).filter(|&i| first_excess[i].is_some()).collect();
    Ok(FaultSet {
        variables,
        first_excess,
    })
}

/// First and last alarmed index at or after `from`.
pub fn alarm_interval(trace: &StatisticTrace, from: usize) -> Option<(usize, usize)> {
    let mut alarmed = trace
        .evaluated()
        .filter(|p| p.t >= from && p.alarm == Some(true))
        .map(|p| p.t);
    let first = alarmed.next()?;
    let last = alarmed.last().unwrap_or(first);
    Some((first, last))
}
