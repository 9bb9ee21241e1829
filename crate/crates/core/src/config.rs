//! Experiment configuration file (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnosis::SearchMode;
use crate::error::{CgstaeError, Result};
use crate::training::TrainConfig;

/// Environment variables that may override paths and thread counts.
pub const ENV_RUN_DIR: &str = "CGSTAE_RUN_DIR";
pub const ENV_DATA_DIR: &str = "CGSTAE_DATA_DIR";
pub const ENV_THREADS: &str = "CGSTAE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    #[default]
    None,
    /// λ2 = 0
    NoPrior,
    /// prior replaced by a seeded random ternary graph
    RandPrior,
    /// λ1 = 0
    NoInvariance,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::None,
        Ablation::NoPrior,
        Ablation::RandPrior,
        Ablation::NoInvariance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::NoPrior => "no-prior",
            Ablation::RandPrior => "rand-prior",
            Ablation::NoInvariance => "no-invariance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    /// `dXX_te.dat` files in `tep_dir`
    Tep,
    /// explicit train and test matrices
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSet {
    pub name: String,
    pub path: PathBuf,
    /// first faulty row (0-based); absent for normal data
    #[serde(default)]
    pub onset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub kind: DataKind,
    #[serde(default)]
    pub tep_dir: Option<PathBuf>,
    /// TEP faults to evaluate; defaults to 1..=21
    #[serde(default)]
    pub faults: Vec<usize>,
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub tests: Vec<TestSet>,
    /// ternary prior graph file
    #[serde(default)]
    pub prior: Option<PathBuf>,
    /// binary ground-truth adjacency, for graph-recovery metrics
    #[serde(default)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub w: usize,
    pub d_h: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { w: 5, d_h: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub significance: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        Self { significance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosisSection {
    pub delta: f64,
    pub mode: SearchMode,
}

impl Default for DiagnosisSection {
    fn default() -> Self {
        Self {
            delta: crate::diagnosis::DEFAULT_DELTA,
            mode: SearchMode::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub ablation: Ablation,
    /// fraction of ground-truth entries revealed when no prior file is given
    pub prior_known_fraction: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            seed: 0,
            threads: None,
            ablation: Ablation::None,
            prior_known_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub monitor: MonitorSection,
    #[serde(default)]
    pub diagnosis: DiagnosisSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CgstaeError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CgstaeError::Config(e.to_string()))
    }

    /// Reads, applies environment overrides, resolves relative paths against
    /// the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CgstaeError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Only paths and the thread count can be overridden.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(dir) = get(ENV_RUN_DIR) {
            self.run.dir = PathBuf::from(dir);
        }
        if let Some(dir) = get(ENV_DATA_DIR) {
            self.data.tep_dir = Some(PathBuf::from(dir));
        }
        if let Some(t) = get(ENV_THREADS) {
            let n = t
                .parse()
                .map_err(|_| CgstaeError::Config(format!("{ENV_THREADS}={t:?} is not a count")))?;
            self.run.threads = Some(n);
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.data.tep_dir,
            &mut self.data.train,
            &mut self.data.prior,
            &mut self.data.truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for t in &mut self.data.tests {
            fix(&mut t.path);
        }
        fix(&mut self.run.dir);
    }

    /// Training hyperparameters with the run seed and the ablation applied.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = self.run.seed;
        match self.run.ablation {
            Ablation::NoPrior => t.lambda[1] = 0.0,
            Ablation::NoInvariance => t.lambda[0] = 0.0,
            Ablation::None | Ablation::RandPrior => {}
        }
        t
    }

    pub fn tep_faults(&self) -> Vec<usize> {
        if self.data.faults.is_empty() {
            (1..=crate::data::TEP_FAULTS).collect()
        } else {
            self.data.faults.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CgstaeError::Config(m));
        if self.model.w < 2 {
            return bad(format!("model.w must be at least 2, got {}", self.model.w));
        }
        if self.model.d_h == 0 {
            return bad("model.d_h must be at least 1".into());
        }
        self.train.validate()?;
        let s = self.monitor.significance;
        if !(s > 0.0 && s < 1.0) {
            return bad(format!("monitor.significance must lie in (0,1), got {s}"));
        }
        let d = self.diagnosis.delta;
        if !(d > 0.0 && d < 1.0) {
            return bad(format!("diagnosis.delta must lie in (0,1), got {d}"));
        }
        if let Some(f) = self.run.prior_known_fraction {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("run.prior_known_fraction must lie in [0,1], got {f}"));
            }
        }
        let must_exist = |p: &Path| -> Result<()> {
            if p.exists() {
                Ok(())
            } else {
                Err(CgstaeError::Config(format!("referenced file {} does not exist", p.display())))
            }
        };
        match self.data.kind {
            DataKind::Tep => {
                let Some(dir) = &self.data.tep_dir else {
                    return bad("data.tep_dir is required for kind = \"tep\"".into());
                };
                must_exist(&crate::data::tep_file(dir, 0))?;
                for f in self.tep_faults() {
                    if f == 0 || f > crate::data::TEP_FAULTS {
                        return bad(format!("TEP fault {f} out of range 1..=21"));
                    }
                    must_exist(&crate::data::tep_file(dir, f))?;
                }
            }
            DataKind::Files => {
                let Some(train) = &self.data.train else {
                    return bad("data.train is required for kind = \"files\"".into());
                };
                must_exist(train)?;
                for t in &self.data.tests {
                    must_exist(&t.path)?;
                }
            }
        }
        for p in [&self.data.prior, &self.data.truth].into_iter().flatten() {
            must_exist(p)?;
        }
        if self.run.prior_known_fraction.is_some() && self.data.truth.is_none() {
            return bad("run.prior_known_fraction needs data.truth".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
kind = "files"
train = "train.dat"
tests = [{ name = "f1", path = "f1.dat", onset = 160 }]

[train]
lambda = [0.02, 0.08, 0.01, 0.03]
epochs_pretrain = 3

[run]
dir = "out"
seed = 4
ablation = "no-invariance"
"#;

    #[test]
    fn parses_and_resolves() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.model, ModelSection::default());
        assert_eq!(cfg.train.epochs_pretrain, 3);
        assert_eq!(cfg.diagnosis.delta, 0.1);
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.data.tests[0].path, PathBuf::from("/base/f1.dat"));
        assert_eq!(cfg.run.dir, PathBuf::from("/base/out"));
        let t = cfg.effective_train();
        assert_eq!((t.seed, t.lambda[0], t.lambda[1]), (4, 0.0, 0.08));
    }

    #[test]
    fn env_overrides_paths_and_threads_only() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.apply_env(|k| match k {
            ENV_RUN_DIR => Some("/tmp/r".into()),
            ENV_THREADS => Some("3".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!((cfg.run.dir.as_path(), cfg.run.threads), (Path::new("/tmp/r"), Some(3)));
        assert!(cfg.apply_env(|k| (k == ENV_THREADS).then(|| "x".into())).is_err());
    }

    #[test]
    fn unknown_keys_and_missing_files() {
        assert!(ExperimentConfig::from_toml("[data]\nkind=\"files\"\nbogus=1\n").is_err());
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/nonexistent"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("does not exist"), "{err}");
        cfg.model.w = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
