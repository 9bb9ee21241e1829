use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CgstaeError, Result};
use crate::training::EpochRecord;

/// Layout of a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self) -> Result<()> {
        for sub in ["", "checkpoints", "traces", "plots", "diagnosis"] {
            let p = self.root.join(sub);
            fs::create_dir_all(&p).map_err(|e| CgstaeError::io(&p, e))?;
        }
        Ok(())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn config_snapshot(&self) -> PathBuf {
        self.path("config.toml")
    }
    pub fn metadata(&self) -> PathBuf {
        self.path("metadata.json")
    }
    pub fn normalizer(&self) -> PathBuf {
        self.path("normalizer.json")
    }
    pub fn pretrain_checkpoint(&self) -> PathBuf {
        self.path("checkpoints/pretrain.json")
    }
    pub fn graph_checkpoint(&self) -> PathBuf {
        self.path("checkpoints/graph.json")
    }
    pub fn finetune_checkpoint(&self) -> PathBuf {
        self.path("checkpoints/finetune.json")
    }
    pub fn monitor_model(&self) -> PathBuf {
        self.path("checkpoints/monitor.json")
    }
    pub fn stage_losses(&self, stage: &str) -> PathBuf {
        self.path(&format!("losses_{stage}.csv"))
    }
    pub fn losses(&self) -> PathBuf {
        self.path("losses.csv")
    }
    pub fn causal_adjacency(&self) -> PathBuf {
        self.path("causal_adjacency.csv")
    }
    pub fn graph_metrics(&self) -> PathBuf {
        self.path("graph_metrics.json")
    }
    pub fn finetune_summary(&self) -> PathBuf {
        self.path("finetune_summary.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.path("metrics.json")
    }
    pub fn metrics_table(&self) -> PathBuf {
        self.path("metrics.csv")
    }
    pub fn trace(&self, name: &str) -> PathBuf {
        self.path(&format!("traces/{name}.csv"))
    }
    pub fn plot(&self, name: &str) -> PathBuf {
        self.path(&format!("plots/{name}.svg"))
    }
    pub fn diagnosis(&self, name: &str, ext: &str) -> PathBuf {
        self.path(&format!("diagnosis/{name}.{ext}"))
    }

    /// Stage-order guard: the upstream artifact must already exist.
    pub fn require(&self, p: &Path) -> Result<()> {
        if p.exists() {
            Ok(())
        } else {
            Err(CgstaeError::StageOrder {
                missing: p.to_path_buf(),
            })
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CgstaeError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CgstaeError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CgstaeError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub const LOSS_HEADER: &str = "epoch,stage,mse,invariance,prior,sparsity,discrete,total,val";

pub fn losses_csv(records: &[EpochRecord], header: bool) -> String {
    let mut s = String::new();
    if header {
        s.push_str(LOSS_HEADER);
        s.push('\n');
    }
    let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x}"));
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.stage.as_str(),
            r.mse,
            opt(r.invariance),
            opt(r.prior),
            opt(r.sparsity),
            opt(r.discrete),
            r.total,
            r.val
        ));
    }
    s
}

/// Concatenates whichever per-stage loss files exist into `losses.csv`.
pub fn rebuild_losses(run: &RunDir) -> Result<()> {
    let mut out = format!("{LOSS_HEADER}\n");
    for stage in ["pretrain", "graph", "finetune"] {
        let p = run.stage_losses(stage);
        if p.exists() {
            let text = fs::read_to_string(&p).map_err(|e| CgstaeError::io(&p, e))?;
            out.push_str(&text);
        }
    }
    write_text(&run.losses(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::Stage;

    #[test]
    fn missing_upstream_is_a_stage_order_error() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::new(dir.path());
        let err = run.require(&run.pretrain_checkpoint()).unwrap_err();
        assert_eq!(err.kind(), "stage_order");
        assert!(err.to_string().contains("pretrain.json"));
    }

    #[test]
    fn loss_rows() {
        let r = EpochRecord {
            epoch: 2,
            stage: Stage::Graph,
            mse: 1.5,
            invariance: Some(0.25),
            prior: None,
            sparsity: Some(1.0),
            discrete: Some(2.0),
            total: 3.0,
            val: 4.0,
        };
        assert_eq!(
            losses_csv(&[r], true),
            format!("{LOSS_HEADER}\n2,graph,1.5,0.25,NA,1,2,3,4\n")
        );
    }
}
