use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::model::MonitorModel;
use crate::error::{CgstaeError, Result};
use crate::model::WindowBatch;
use crate::numerics::Matrix;

/// Statistics at one series index. The first `w − 1` indices have no
/// statistics (insufficient history).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: usize,
    pub t2: Option<f64>,
    pub spe: Option<f64>,
    pub alarm: Option<bool>,
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticTrace {
    pub w: usize,
    pub alpha_t2: f64,
    pub alpha_spe: f64,
    pub points: Vec<TracePoint>,
}

impl StatisticTrace {
    /// `stats[k]` belongs to index `w − 1 + k`.
    pub fn from_statistics(
        w: usize,
        stats: &[(f64, f64)],
        alpha_t2: f64,
        alpha_spe: f64,
    ) -> Result<Self> {
        if w == 0 {
            return Err(CgstaeError::Argument("window length must be positive".into()));
        }
        let mut points: Vec<TracePoint> = (0..w - 1)
            .map(|t| TracePoint {
                t,
                t2: None,
                spe: None,
                alarm: None,
                label: None,
            })
            .collect();
        for (k, &(t2, spe)) in stats.iter().enumerate() {
            if !(t2 >= 0.0 && spe >= 0.0) {
                return Err(CgstaeError::Numeric(format!(
                    "invalid statistics T2={t2}, SPE={spe} at index {}",
                    w - 1 + k
                )));
            }
            points.push(TracePoint {
                t: w - 1 + k,
                t2: Some(t2),
                spe: Some(spe),
                alarm: Some(t2 > alpha_t2 || spe > alpha_spe),
                label: None,
            });
        }
        Ok(Self {
            w,
            alpha_t2,
            alpha_spe,
            points,
        })
    }

    /// Labels indices at or after `onset` as faulty.
    pub fn with_onset(mut self, onset: usize) -> Result<Self> {
        if onset > self.points.len() {
            return Err(CgstaeError::Argument(format!(
                "onset {onset} outside trace of {} samples",
                self.points.len()
            )));
        }
        for p in &mut self.points {
            p.label = Some(p.t >= onset);
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points that carry statistics.
    pub fn evaluated(&self) -> impl Iterator<Item = &TracePoint> {
        self.points.iter().filter(|p| p.alarm.is_some())
    }

    pub fn alarm_rate(&self) -> f64 {
        let (mut n, mut a) = (0usize, 0usize);
        for p in self.evaluated() {
            n += 1;
            a += usize::from(p.alarm == Some(true));
        }
        if n == 0 {
            0.0
        } else {
            a as f64 / n as f64
        }
    }

    /// Columns `t,T2,SPE,alpha_T2,alpha_SPE,alarm,label`; missing values are `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,T2,SPE,alpha_T2,alpha_SPE,alarm,label\n");
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x}"));
        let flag = |v: Option<bool>| v.map_or("NA", |b| if b { "1" } else { "0" });
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.t,
                opt(p.t2),
                opt(p.spe),
                self.alpha_t2,
                self.alpha_spe,
                flag(p.alarm),
                flag(p.label)
            );
        }
        s
    }
}

/// Sliding-window monitoring of a normalized `T×n` series.
pub fn detect(series: &Matrix, model: &MonitorModel) -> Result<StatisticTrace> {
    let w = model.dims.w;
    if series.rows() < w {
        return Err(CgstaeError::Argument(format!(
            "series of {} samples is shorter than the window length {w}",
            series.rows()
        )));
    }
    let batch = WindowBatch::from_series(series, w)?;
    let stats = batch
        .windows()
        .par_iter()
        .map(|x| model.evaluate_window(x).map(|e| (e.t2, e.spe)))
        .collect::<Result<Vec<_>>>()?;
    StatisticTrace::from_statistics(w, &stats, model.alpha_t2, model.alpha_spe)
}
