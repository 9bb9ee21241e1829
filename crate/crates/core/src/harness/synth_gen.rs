use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::write_text;
use crate::config::{DataKind, DataSection, ExperimentConfig, RunSection, TestSet};
use crate::data::{format_matrix, save_prior, SynthFault, SynthSpec};
use crate::error::{CgstaeError, Result};
use crate::training::PriorGraph;

/// Knobs for a generated synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    pub n: usize,
    pub edges: usize,
    pub regimes: usize,
    pub train_length: usize,
    pub test_length: usize,
    pub onset: usize,
    /// step size in units of the base noise std
    pub fault_magnitude: f64,
    /// variables receiving a fault, one test file each
    pub fault_variables: Vec<usize>,
    pub prior_fraction: f64,
    /// replaces the random process autoregression when set
    pub autoregression: Option<f64>,
    /// multiplies every edge weight
    pub weight_scale: f64,
    /// unit noise, zero offsets and unit mechanism scale in every regime
    pub stationary: bool,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            n: 10,
            edges: 15,
            regimes: 3,
            train_length: 3000,
            test_length: 960,
            onset: 160,
            fault_magnitude: 5.0,
            fault_variables: vec![0, 3, 7],
            prior_fraction: 0.3,
            autoregression: None,
            weight_scale: 1.0,
            stationary: false,
            seed: 0,
        }
    }
}

impl SynthOptions {
    /// Process specification used for the training series.
    pub fn spec(&self) -> Result<SynthSpec> {
        let mut spec = SynthSpec::random_process(
            self.n,
            self.edges,
            self.regimes,
            self.train_length,
            self.seed,
        )?;
        if let Some(ar) = self.autoregression {
            spec.autoregression = ar;
        }
        for e in &mut spec.edges {
            e.weight *= self.weight_scale;
        }
        if self.stationary {
            for r in &mut spec.regimes {
                r.noise_scale = vec![1.0; self.n];
                r.offset = vec![0.0; self.n];
                r.weight_scale = 1.0;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Held-out normal data from the same process with another noise seed.
    pub fn normal_spec(&self, spec: &SynthSpec) -> SynthSpec {
        let mut s = spec.clone();
        s.length = self.test_length;
        s.seed = spec.seed.wrapping_add(1000);
        s
    }

    pub fn fault_spec(&self, spec: &SynthSpec, variable: usize) -> SynthSpec {
        let mut s = self.normal_spec(spec);
        s.seed = spec.seed.wrapping_add(2000 + variable as u64);
        s.faults = vec![SynthFault {
            variable,
            onset: self.onset,
            magnitude: self.fault_magnitude * spec.noise_std,
        }];
        s
    }
}

/// Writes data, truth, prior and an `experiment.toml` into `out`. Returns
/// the config path.
pub fn write_synth_experiment(opts: &SynthOptions, out: &Path) -> Result<PathBuf> {
    if let Some(v) = opts.fault_variables.iter().find(|v| **v >= opts.n) {
        return Err(CgstaeError::Argument(format!("fault variable {v} out of range")));
    }
    if opts.onset >= opts.test_length {
        return Err(CgstaeError::Argument("onset must fall inside the test series".into()));
    }
    let spec = opts.spec()?;
    let train = spec.generate()?;
    write_text(&out.join("train.dat"), &format_matrix(&train.series))?;
    write_text(&out.join("truth.dat"), &format_matrix(&train.truth))?;
    write_text(
        &out.join("spec.toml"),
        &toml::to_string_pretty(&spec).map_err(|e| CgstaeError::Config(e.to_string()))?,
    )?;
    let prior = PriorGraph::reveal_from_truth(&train.truth, opts.prior_fraction, opts.seed)?;
    save_prior(&out.join("prior.txt"), &prior)?;

    let mut tests = Vec::new();
    let normal = opts.normal_spec(&spec).generate()?;
    write_text(&out.join("normal.dat"), &format_matrix(&normal.series))?;
    tests.push(TestSet {
        name: "normal".into(),
        path: "normal.dat".into(),
        onset: None,
    });
    for &v in &opts.fault_variables {
        let name = data_name(v);
        let data = opts.fault_spec(&spec, v).generate()?;
        write_text(&out.join(format!("{name}.dat")), &format_matrix(&data.series))?;
        tests.push(TestSet {
            path: format!("{name}.dat").into(),
            name,
            onset: data.onset,
        });
    }
    let cfg = ExperimentConfig {
        data: DataSection {
            kind: DataKind::Files,
            tep_dir: None,
            faults: Vec::new(),
            train: Some("train.dat".into()),
            tests,
            prior: Some("prior.txt".into()),
            truth: Some("truth.dat".into()),
        },
        model: Default::default(),
        train: Default::default(),
        monitor: Default::default(),
        diagnosis: Default::default(),
        run: RunSection {
            dir: "run".into(),
            seed: opts.seed,
            ..RunSection::default()
        },
    };
    let path = out.join("experiment.toml");
    write_text(&path, &cfg.to_toml()?)?;
    Ok(path)
}

fn data_name(v: usize) -> String {
    format!("fault_x{}", v + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_a_loadable_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions {
            train_length: 300,
            test_length: 200,
            onset: 50,
            fault_variables: vec![1],
            ..SynthOptions::default()
        };
        let p = write_synth_experiment(&opts, dir.path()).unwrap();
        let cfg = ExperimentConfig::load(&p).unwrap();
        assert_eq!(cfg.data.tests.len(), 2);
        assert_eq!(cfg.data.tests[1].onset, Some(50));
        assert!(cfg.data.tests[1].path.ends_with("fault_x2.dat"));
        assert!(opts.spec().unwrap().edges.len() == 15);
    }

    #[test]
    fn fault_magnitude_is_in_noise_units() {
        let opts = SynthOptions::default();
        let mut spec = opts.spec().unwrap();
        spec.noise_std = 2.0;
        let f = opts.fault_spec(&spec, 3);
        assert_eq!(f.faults[0].magnitude, 10.0);
        assert_eq!(f.faults[0].onset, 160);
    }
}
