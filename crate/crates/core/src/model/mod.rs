//! Spatial self-attention graph learner and the GCLSTM sequence-to-sequence
//! reconstructor.

mod cell;
mod checkpoint;
mod network;
mod params;

pub use cell::LstmState;
pub use checkpoint::{Checkpoint, CheckpointMode, CHECKPOINT_FORMAT};
pub use network::{
    backward, decode_window, encode_window, encoder_step, forward_traced, model_forward,
    ssam_forward, ForwardOutput, GraphMode, WindowGrads, WindowTrace,
};
pub use params::{
    CgstaeParams, DecoderHead, Gate, GclstmParams, ModelDims, ParamSet, SsamParams, StaeParams,
};

use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Sliding windows `X^(t) = [x^(t-w+1), …, x^(t)]` over a `T×n` series.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    windows: Vec<Matrix>,
    /// index of the last row of each window in the source series
    ends: Vec<usize>,
    w: usize,
}

impl WindowBatch {
    /// Every full-length window with stride 1. The first window ends at row `w-1`.
    pub fn from_series(series: &Matrix, w: usize) -> Result<Self> {
        if w == 0 {
            return Err(CgstaeError::Argument("window length must be positive".into()));
        }
        if series.rows() < w {
            return Err(CgstaeError::Argument(format!(
                "series of {} rows is shorter than window length {}",
                series.rows(),
                w
            )));
        }
        let ends: Vec<usize> = (w - 1..series.rows()).collect();
        let windows = ends
            .iter()
            .map(|&t| series.slice_rows(t + 1 - w, t + 1))
            .collect();
        Ok(Self { windows, ends, w })
    }

    pub fn from_windows(windows: Vec<Matrix>, ends: Vec<usize>) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| CgstaeError::Argument("empty window batch".into()))?;
        let (w, n) = first.shape();
        if windows.iter().any(|m| m.shape() != (w, n)) || ends.len() != windows.len() {
            return Err(CgstaeError::Dimension("ragged window batch".into()));
        }
        Ok(Self { windows, ends, w })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.w
    }

    pub fn n(&self) -> usize {
        self.windows.first().map_or(0, |m| m.cols())
    }

    pub fn windows(&self) -> &[Matrix] {
        &self.windows
    }

    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    /// Splits off the last `fraction` of windows (in time order) as validation.
    pub fn split_tail(&self, fraction: f64) -> Result<(WindowBatch, WindowBatch)> {
        let n_val = ((self.len() as f64) * fraction).round() as usize;
        let n_val = n_val.max(1);
        if n_val >= self.len() {
            return Err(CgstaeError::Argument(format!(
                "cannot hold out {} of {} windows for validation",
                n_val,
                self.len()
            )));
        }
        let cut = self.len() - n_val;
        let head = WindowBatch {
            windows: self.windows[..cut].to_vec(),
            ends: self.ends[..cut].to_vec(),
            w: self.w,
        };
        let tail = WindowBatch {
            windows: self.windows[cut..].to_vec(),
            ends: self.ends[cut..].to_vec(),
            w: self.w,
        };
        Ok((head, tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_series() {
        let series = Matrix::from_fn(6, 2, |i, j| (i * 10 + j) as f64);
        let b = WindowBatch::from_series(&series, 3).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.ends(), &[2, 3, 4, 5]);
        assert_eq!(b.windows()[1].row(0), &[10.0, 11.0]);
        assert_eq!(b.windows()[3].row(2), &[50.0, 51.0]);
        assert!(WindowBatch::from_series(&series, 7).is_err());
    }

    #[test]
    fn tail_split_keeps_time_order() {
        let series = Matrix::from_fn(23, 1, |i, _| i as f64);
        let b = WindowBatch::from_series(&series, 4).unwrap();
        let (train, val) = b.split_tail(0.1).unwrap();
        assert_eq!(train.len() + val.len(), 20);
        assert_eq!(val.len(), 2);
        assert!(train.ends().last().unwrap() < val.ends().first().unwrap());
    }
}
