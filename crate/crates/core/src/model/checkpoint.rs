use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{CgstaeParams, ModelDims, ParamSet};
use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Format tag written into every checkpoint; bumped on layout changes.
pub const CHECKPOINT_FORMAT: &str = "cgstae-checkpoint/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointMode {
    Correlation,
    Causal,
}

/// Self-describing JSON model container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub dims: ModelDims,
    pub mode: CheckpointMode,
    pub params: CgstaeParams,
    /// Causal adjacency; required in causal mode.
    pub causal_graph: Option<Matrix>,
}

impl Checkpoint {
    pub fn correlation(dims: ModelDims, params: CgstaeParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            dims,
            mode: CheckpointMode::Correlation,
            params,
            causal_graph: None,
        }
    }

    pub fn causal(dims: ModelDims, params: CgstaeParams, graph: Matrix) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            dims,
            mode: CheckpointMode::Causal,
            params,
            causal_graph: Some(graph),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(CgstaeError::Config(format!(
                "unsupported checkpoint format '{}', expected '{}'",
                self.format, CHECKPOINT_FORMAT
            )));
        }
        self.params.check_dims(self.dims)?;
        if !self.params.is_finite() {
            return Err(CgstaeError::Numeric("checkpoint holds non-finite parameters".into()));
        }
        match (&self.mode, &self.causal_graph) {
            (CheckpointMode::Causal, None) => Err(CgstaeError::State(
                "causal-mode checkpoint without a causal graph".into(),
            )),
            (_, Some(a)) if a.shape() != (self.dims.n, self.dims.n) => Err(
                CgstaeError::Dimension(format!("causal graph shape {:?}", a.shape())),
            ),
            _ => Ok(()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| CgstaeError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CgstaeError::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dims = ModelDims::new(4, 3, 2).unwrap();
        let params = CgstaeParams::init(dims, 3);
        let a = Matrix::from_fn(4, 4, |i, j| ((i + 1) as f64 / (j + 3) as f64).min(1.0) / 3.0);
        let ckpt = Checkpoint::causal(dims, params, a);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }

    #[test]
    fn rejects_bad_format_and_missing_graph() {
        let dims = ModelDims::new(2, 2, 1).unwrap();
        let mut ckpt = Checkpoint::correlation(dims, CgstaeParams::zeros(dims));
        ckpt.validate().unwrap();
        ckpt.mode = CheckpointMode::Causal;
        assert!(matches!(ckpt.validate(), Err(CgstaeError::State(_))));
        ckpt.mode = CheckpointMode::Correlation;
        ckpt.format = "other/v0".into();
        assert!(ckpt.validate().is_err());
    }
}
