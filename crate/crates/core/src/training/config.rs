use serde::{Deserialize, Serialize};

use crate::error::{CgstaeError, Result};

/// Hyperparameters of the three-step procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weights of the invariance, prior, sparsity and discreteness terms.
    pub lambda: [f64; 4],
    pub lr_pretrain: f64,
    pub lr_graph: f64,
    pub lr_finetune: f64,
    pub batch_size: usize,
    pub epochs_pretrain: usize,
    pub epochs_graph: usize,
    pub epochs_finetune: usize,
    pub patience: usize,
    /// Heavy-ball momentum; 0 gives plain gradient descent.
    pub momentum: f64,
    /// Trailing fraction of windows held out for validation.
    pub val_fraction: f64,
    /// Number of training windows averaged for the initial causal graph.
    pub graph_init_windows: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: [0.02, 0.08, 0.01, 0.03],
            lr_pretrain: 0.05,
            lr_graph: 0.1,
            lr_finetune: 0.05,
            batch_size: 32,
            epochs_pretrain: 100,
            epochs_graph: 100,
            epochs_finetune: 100,
            patience: 5,
            momentum: 0.0,
            val_fraction: 0.1,
            graph_init_windows: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CgstaeError::Config(msg));
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad(format!("lambda must be non-negative, got {:?}", self.lambda));
        }
        // lr = 0 is accepted so that a frozen run can be expressed
        for (name, lr) in [
            ("lr_pretrain", self.lr_pretrain),
            ("lr_graph", self.lr_graph),
            ("lr_finetune", self.lr_finetune),
        ] {
            if !(lr.is_finite() && lr >= 0.0) {
                return bad(format!("{name} must be a non-negative finite number, got {lr}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0,1), got {}", self.momentum));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return bad(format!("val_fraction must lie in (0, 0.5), got {}", self.val_fraction));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        c.patience = 3;
        c.lambda[2] = -0.1;
        assert!(c.validate().is_err());
        c.lambda[2] = 0.0;
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }
}
