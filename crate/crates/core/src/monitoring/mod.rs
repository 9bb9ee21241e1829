//! Fault detection with T² on the encoder's final hidden state and SPE on
//! the reconstruction residual, against KDE control limits.

mod metrics;
mod model;
mod stats;
mod trace;

pub use metrics::{score, DetectionScore};
pub use model::{
    calibrate, Calibration, MonitorModel, WindowEvaluation, MIN_CALIBRATION_WINDOWS,
    MONITOR_FORMAT,
};
pub use stats::{hotelling_t2, invert_spd, mean_and_covariance, ridge, spe_statistic, RIDGE_FLOOR};
pub use trace::{detect, StatisticTrace, TracePoint};
