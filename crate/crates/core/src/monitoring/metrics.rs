use serde::{Deserialize, Serialize};

use super::trace::StatisticTrace;
use crate::error::{CgstaeError, Result};

/// Sample-level detection metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub fdr: f64,
    pub far: f64,
    pub precision: f64,
    pub f1: f64,
    pub faulty: usize,
    pub normal: usize,
    pub true_alarms: usize,
    pub false_alarms: usize,
}

impl DetectionScore {
    pub fn from_counts(faulty: usize, normal: usize, true_alarms: usize, false_alarms: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let fdr = ratio(true_alarms, faulty);
        let far = ratio(false_alarms, normal);
        let alarms = true_alarms + false_alarms;
        let precision = if alarms == 0 {
            if faulty == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            true_alarms as f64 / alarms as f64
        };
        let f1 = if precision + fdr == 0.0 {
            0.0
        } else {
            2.0 * precision * fdr / (precision + fdr)
        };
        Self {
            fdr,
            far,
            precision,
            f1,
            faulty,
            normal,
            true_alarms,
            false_alarms,
        }
    }
}

/// Scores the evaluated points of a trace; indices `≥ onset` are faulty.
pub fn score(trace: &StatisticTrace, onset: usize) -> Result<DetectionScore> {
    if onset > trace.len() {
        return Err(CgstaeError::Argument(format!(
            "onset {onset} outside trace of {} samples",
            trace.len()
        )));
    }
    let (mut faulty, mut normal, mut tp, mut fp) = (0, 0, 0, 0);
    for p in trace.evaluated() {
        let alarm = p.alarm == Some(true);
        if p.t >= onset {
            faulty += 1;
            tp += usize::from(alarm);
        } else {
            normal += 1;
            fp += usize::from(alarm);
        }
    }
    Ok(DetectionScore::from_counts(faulty, normal, tp, fp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_fixture() {
        let s = DetectionScore::from_counts(800, 160, 780, 8);
        assert!((s.fdr - 0.975).abs() < 1e-12);
        assert!((s.far - 0.05).abs() < 1e-12);
        let p = 780.0 / 788.0;
        let f1 = 2.0 * p * 0.975 / (p + 0.975);
        assert!((s.f1 - f1).abs() < 1e-12);
        assert!((s.f1 - 0.982368).abs() < 1e-6);
    }

    #[test]
    fn all_and_none_alarmed() {
        let all = StatisticTrace::from_statistics(1, &[(9.0, 9.0); 10], 1.0, 1.0).unwrap();
        let s = score(&all, 4).unwrap();
        assert_eq!((s.fdr, s.far), (1.0, 1.0));
        let none = StatisticTrace::from_statistics(1, &[(0.0, 0.0); 10], 1.0, 1.0).unwrap();
        let s = score(&none, 4).unwrap();
        assert_eq!((s.fdr, s.far, s.precision, s.f1), (0.0, 0.0, 0.0, 0.0));
        let s = score(&none, 10).unwrap();
        assert_eq!((s.faulty, s.precision), (0, 1.0));
        assert!(score(&none, 11).is_err());
    }

    #[test]
    fn insufficient_history_is_not_counted() {
        let tr = StatisticTrace::from_statistics(4, &[(9.0, 0.0); 6], 1.0, 1.0).unwrap();
        let s = score(&tr, 5).unwrap();
        assert_eq!((s.normal, s.faulty), (2, 4));
    }
}
