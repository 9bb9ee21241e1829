use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{hotelling_t2, invert_spd, mean_and_covariance, ridge, spe_statistic};
use crate::data::Normalizer;
use crate::error::{CgstaeError, Result};
use crate::model::{model_forward, CgstaeParams, GraphMode, ModelDims, WindowBatch};
use crate::numerics::{kde_control_limit, KdeEstimate, Matrix};

pub const MONITOR_FORMAT: &str = "cgstae-monitor/v1";
/// Fewest training windows accepted for calibration.
pub const MIN_CALIBRATION_WINDOWS: usize = 100;

/// Frozen causal-mode model with its feature-space statistics and control limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorModel {
    pub format: String,
    pub dims: ModelDims,
    pub params: CgstaeParams,
    pub causal_graph: Matrix,
    /// applied by [`MonitorModel::evaluate_raw_window`]
    pub normalizer: Option<Normalizer>,
    pub h_bar: Vec<f64>,
    pub sigma_inv: Matrix,
    pub ridge: f64,
    pub alpha_t2: f64,
    pub alpha_spe: f64,
    pub significance: f64,
}

/// Statistics of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEvaluation {
    pub t2: f64,
    pub spe: f64,
    pub hidden: Vec<f64>,
    pub reconstruction: Matrix,
}

/// Training statistics gathered during calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub model: MonitorModel,
    pub train_t2: Vec<f64>,
    pub train_spe: Vec<f64>,
}

fn forward_window(
    x: &Matrix,
    params: &CgstaeParams,
    graph: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    let out = model_forward(x, GraphMode::Causal(graph), params)?;
    Ok((out.enc_final.hidden_flat(), out.reconstruction))
}

/// Fits h̄, the ridge-regularized inverse covariance and KDE limits on
/// (normalized) training windows.
pub fn calibrate(
    params: CgstaeParams,
    causal_graph: Matrix,
    windows: &WindowBatch,
    significance: f64,
) -> Result<Calibration> {
    if windows.len() < MIN_CALIBRATION_WINDOWS {
        return Err(CgstaeError::Argument(format!(
            "calibration needs at least {MIN_CALIBRATION_WINDOWS} windows, got {}",
            windows.len()
        )));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(CgstaeError::Argument(format!(
            "significance must lie in (0,1), got {significance}"
        )));
    }
    let dims = ModelDims::new(windows.n(), windows.window_len(), params.stae.d_h())?;
    params.check_dims(dims)?;
    let outs = windows
        .windows()
        .par_iter()
        .map(|x| {
            let (h, r) = forward_window(x, &params, &causal_graph)?;
            Ok((h, spe_statistic(x, &r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let hidden: Vec<Vec<f64>> = outs.iter().map(|(h, _)| h.clone()).collect();
    let train_spe: Vec<f64> = outs.iter().map(|(_, s)| *s).collect();
    let (h_bar, cov) = mean_and_covariance(&hidden)?;
    let (reg, eps) = ridge(&cov);
    let sigma_inv = invert_spd(&reg)?;
    let train_t2 = hidden
        .iter()
        .map(|h| hotelling_t2(h, &h_bar, &sigma_inv))
        .collect::<Result<Vec<_>>>()?;
    let alpha_t2 = kde_control_limit(&KdeEstimate::new(train_t2.clone(), significance)?)?;
    let alpha_spe = kde_control_limit(&KdeEstimate::new(train_spe.clone(), significance)?)?;
    let model = MonitorModel {
        format: MONITOR_FORMAT.to_string(),
        dims,
        params,
        causal_graph,
        normalizer: None,
        h_bar,
        sigma_inv,
        ridge: eps,
        alpha_t2,
        alpha_spe,
        significance,
    };
    model.validate()?;
    Ok(Calibration {
        model,
        train_t2,
        train_spe,
    })
}

impl MonitorModel {
    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Result<Self> {
        if normalizer.n() != self.dims.n {
            return Err(CgstaeError::Dimension(format!(
                "normalizer for {} variables, model for {}",
                normalizer.n(),
                self.dims.n
            )));
        }
        self.normalizer = Some(normalizer);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MONITOR_FORMAT {
            return Err(CgstaeError::State(format!(
                "unsupported monitor format {:?}",
                self.format
            )));
        }
        self.params.check_dims(self.dims)?;
        let d = self.dims.n * self.dims.d_h;
        if self.h_bar.len() != d || self.sigma_inv.shape() != (d, d) {
            return Err(CgstaeError::State("monitor model is not calibrated".into()));
        }
        if self.causal_graph.shape() != (self.dims.n, self.dims.n) {
            return Err(CgstaeError::Dimension("causal graph shape".into()));
        }
        for (name, a) in [("alpha_T2", self.alpha_t2), ("alpha_SPE", self.alpha_spe)] {
            if !(a.is_finite() && a > 0.0) {
                return Err(CgstaeError::Numeric(format!("{name} = {a} is not a positive limit")));
            }
        }
        Ok(())
    }

    pub fn t2_statistic(&self, hidden: &[f64]) -> Result<f64> {
        hotelling_t2(hidden, &self.h_bar, &self.sigma_inv)
    }

    /// Statistics for a window that is already normalized.
    pub fn evaluate_window(&self, x: &Matrix) -> Result<WindowEvaluation> {
        if x.shape() != (self.dims.w, self.dims.n) {
            return Err(CgstaeError::Dimension(format!(
                "window {:?}, model expects {}×{}",
                x.shape(),
                self.dims.w,
                self.dims.n
            )));
        }
        let (hidden, reconstruction) = forward_window(x, &self.params, &self.causal_graph)?;
        Ok(WindowEvaluation {
            t2: self.t2_statistic(&hidden)?,
            spe: spe_statistic(x, &reconstruction)?,
            hidden,
            reconstruction,
        })
    }

    /// Normalizes with the stored statistics first, if any.
    pub fn evaluate_raw_window(&self, x: &Matrix) -> Result<WindowEvaluation> {
        match &self.normalizer {
            Some(norm) => self.evaluate_window(&norm.apply(x)?),
            None => self.evaluate_window(x),
        }
    }

    /// Fault predicate for one window's statistics.
    pub fn is_fault(&self, t2: f64, spe: f64) -> bool {
        t2 > self.alpha_t2 || spe > self.alpha_spe
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| CgstaeError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CgstaeError::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(len: usize) -> WindowBatch {
        let series = Matrix::from_fn(len, 3, |t, j| ((t * (j + 2)) as f64 * 0.37).sin());
        WindowBatch::from_series(&series, 3).unwrap()
    }

    #[test]
    fn constant_hidden_states_are_handled() {
        // zero parameters give identical (zero) hidden states for every window
        let dims = ModelDims::new(3, 3, 2).unwrap();
        let cal = calibrate(CgstaeParams::zeros(dims), Matrix::filled(3, 3, 0.5), &batch(150), 0.01)
            .unwrap();
        assert!(cal.train_t2.iter().all(|t| *t == 0.0));
        assert!(cal.model.alpha_t2 > 0.0);
        assert_eq!(cal.model.ridge, super::super::stats::RIDGE_FLOOR);
    }

    #[test]
    fn too_few_windows() {
        let dims = ModelDims::new(3, 3, 2).unwrap();
        let err = calibrate(CgstaeParams::zeros(dims), Matrix::filled(3, 3, 0.5), &batch(50), 0.01);
        assert!(matches!(err, Err(CgstaeError::Argument(_))));
    }

    #[test]
    fn limits_cover_training_quantile_and_round_trip() {
        let dims = ModelDims::new(3, 3, 2).unwrap();
        let params = CgstaeParams::init(dims, 3);
        let cal = calibrate(params, Matrix::filled(3, 3, 0.3), &batch(400), 0.01).unwrap();
        for (stat, alpha) in [(&cal.train_t2, cal.model.alpha_t2), (&cal.train_spe, cal.model.alpha_spe)] {
            let mut s = stat.clone();
            s.sort_by(f64::total_cmp);
            assert!(alpha >= s[(0.95 * (s.len() - 1) as f64) as usize]);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        cal.model.save(&p).unwrap();
        assert_eq!(MonitorModel::load(&p).unwrap(), cal.model);
        let x = batch(10).windows()[2].clone();
        let a = cal.model.evaluate_window(&x).unwrap();
        assert_eq!(a.spe, spe_statistic(&x, &a.reconstruction).unwrap());
    }
}
