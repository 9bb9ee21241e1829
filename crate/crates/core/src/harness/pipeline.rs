use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plot::{subgraph_svg, trace_svg};
use super::run::{losses_csv, read_json, rebuild_losses, write_json, write_text, RunDir};
use crate::config::{Ablation, DataKind, ExperimentConfig};
use crate::data::{
    format_csv, load_prior, load_tep, read_matrix, tep_file, Dataset, Normalizer, Role,
};
use crate::diagnosis::{
    alarm_interval, contribution_trace, fault_variable_set, optimal_subgraph, truncate_graph,
    DiagnosisReport, DiscreteCausalGraph,
};
use crate::error::{CgstaeError, Result};
use crate::model::{CgstaeParams, Checkpoint, CheckpointMode, ModelDims, WindowBatch};
use crate::monitoring::{calibrate, detect, score, DetectionScore, MonitorModel};
use crate::numerics::Matrix;
use crate::training::{finetune, learn_causal_graph, pretrain, PriorEntry, PriorGraph};

/// Off-diagonal directed edge agreement with a ground-truth graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

pub fn edge_scores(learned: &DiscreteCausalGraph, truth: &Matrix) -> Result<EdgeScore> {
    if truth.shape() != (learned.n, learned.n) {
        return Err(CgstaeError::Dimension(format!(
            "truth {:?} for a graph of n={}",
            truth.shape(),
            learned.n
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for i in 0..learned.n {
        for j in 0..learned.n {
            if i == j {
                continue;
            }
            match (learned.has_edge(i, j), truth[(i, j)] > 0.5) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EdgeScore {
        precision,
        recall,
        f1,
        true_positive: tp,
        false_positive: fp,
        false_negative: fneg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultMetrics {
    pub name: String,
    pub onset: Option<usize>,
    #[serde(flatten)]
    pub score: DetectionScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageMetrics {
    pub fdr: f64,
    pub far: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub significance: f64,
    pub alpha_t2: f64,
    pub alpha_spe: f64,
    pub faults: Vec<FaultMetrics>,
    /// over test sets that contain faulty samples
    pub average: AverageMetrics,
    pub normal_alarm_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneSummary {
    pub pretrain_val: f64,
    pub finetune_initial_val: f64,
    pub finetune_best_val: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub delta: f64,
    pub edges: usize,
    pub score: Option<EdgeScore>,
}

/// Loaded configuration bound to its run directory.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub run: RunDir,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Self {
        let run = RunDir::new(cfg.run.dir.clone());
        Self { cfg, run }
    }

    pub fn train_dataset(&self) -> Result<Dataset> {
        match self.cfg.data.kind {
            DataKind::Tep => {
                let dir = self.cfg.data.tep_dir.as_ref().ok_or_else(|| {
                    CgstaeError::Config("data.tep_dir is required".into())
                })?;
                load_tep(&tep_file(dir, 0), Role::Train)
            }
            DataKind::Files => {
                let p = self.cfg.data.train.as_ref().ok_or_else(|| {
                    CgstaeError::Config("data.train is required".into())
                })?;
                Dataset::load(p, Role::Train, None)
            }
        }
    }

    /// (name, dataset) for every configured test set.
    pub fn test_datasets(&self) -> Result<Vec<(String, Dataset)>> {
        match self.cfg.data.kind {
            DataKind::Tep => {
                let dir = self.cfg.data.tep_dir.as_ref().ok_or_else(|| {
                    CgstaeError::Config("data.tep_dir is required".into())
                })?;
                self.cfg
                    .tep_faults()
                    .into_iter()
                    .map(|f| Ok((format!("fault{f:02}"), load_tep(&tep_file(dir, f), Role::Test)?)))
                    .collect()
            }
            DataKind::Files => self
                .cfg
                .data
                .tests
                .iter()
                .map(|t| Ok((t.name.clone(), Dataset::load(&t.path, Role::Test, t.onset)?)))
                .collect(),
        }
    }

    fn normalized_train(&self) -> Result<(Dataset, Normalizer)> {
        let mut ds = self.train_dataset()?;
        let norm = if self.run.normalizer().exists() {
            read_json(&self.run.normalizer())?
        } else {
            ds.fit_normalizer()?
        };
        ds.normalize(&norm)?;
        Ok((ds, norm))
    }

    fn dims(&self, n: usize) -> Result<ModelDims> {
        ModelDims::new(n, self.cfg.model.w, self.cfg.model.d_h)
    }

    fn windows(&self, ds: &Dataset) -> Result<(WindowBatch, WindowBatch, WindowBatch)> {
        let all = WindowBatch::from_series(&ds.series, self.cfg.model.w)?;
        let (train, val) = all.split_tail(self.cfg.train.val_fraction)?;
        Ok((all, train, val))
    }

    fn truth(&self) -> Result<Option<Matrix>> {
        self.cfg.data.truth.as_deref().map(read_matrix).transpose()
    }

    /// Prior from file, or revealed from the ground truth, with the
    /// random-prior ablation applied.
    pub fn prior(&self) -> Result<Option<PriorGraph>> {
        let base = match (&self.cfg.data.prior, self.cfg.run.prior_known_fraction) {
            (Some(p), _) => Some(load_prior(p)?),
            (None, Some(f)) => {
                let truth = self.truth()?.ok_or_else(|| {
                    CgstaeError::Config("prior_known_fraction needs data.truth".into())
                })?;
                Some(PriorGraph::reveal_from_truth(&truth, f, self.cfg.run.seed)?)
            }
            (None, None) => None,
        };
        if self.cfg.run.ablation != Ablation::RandPrior {
            return Ok(base);
        }
        let Some(base) = base else {
            log::warn!("random-prior ablation without a prior; using an all-unknown prior");
            return Ok(None);
        };
        let known = base.known_count().max(1) as f64;
        let edges = base.entries().iter().filter(|e| **e == PriorEntry::Edge).count() as f64;
        Ok(Some(PriorGraph::random_like(
            &base,
            edges / known,
            self.cfg.run.seed ^ 0xA5A5,
        )))
    }

    fn write_metadata(&self, command: &str) -> Result<()> {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time": secs,
        });
        write_json(&self.run.metadata(), &meta)
    }

    /// Step 1. Writes the config snapshot, normalizer, pre-training
    /// checkpoint and loss log.
    pub fn stage_train(&self) -> Result<f64> {
        self.run.create()?;
        write_text(&self.run.config_snapshot(), &self.cfg.to_toml()?)?;
        self.write_metadata("train")?;
        let mut ds = self.train_dataset()?;
        let norm = ds.fit_normalizer()?;
        ds.normalize(&norm)?;
        write_json(&self.run.normalizer(), &norm)?;
        let (_, train, val) = self.windows(&ds)?;
        let dims = self.dims(ds.n())?;
        let tcfg = self.cfg.effective_train();
        let res = pretrain(&train, &val, CgstaeParams::init(dims, self.cfg.run.seed), &tcfg)?;
        Checkpoint::correlation(dims, res.params).save(&self.run.pretrain_checkpoint())?;
        write_text(&self.run.stage_losses("pretrain"), &losses_csv(&res.history, false))?;
        rebuild_losses(&self.run)?;
        log::info!("pre-training finished: best validation MSE {:.6}", res.best_val);
        Ok(res.best_val)
    }

    /// Step 2. Needs the pre-training checkpoint.
    pub fn stage_graph(&self) -> Result<GraphMetrics> {
        self.run.require(&self.run.pretrain_checkpoint())?;
        self.run.require(&self.run.normalizer())?;
        let ck = Checkpoint::load(&self.run.pretrain_checkpoint())?;
        let (ds, _) = self.normalized_train()?;
        let (_, train, val) = self.windows(&ds)?;
        let prior = self.prior()?;
        let tcfg = self.cfg.effective_train();
        let res = learn_causal_graph(&train, &val, &ck.params, prior.as_ref(), &tcfg)?;
        let a = res.graph.adjacency();
        Checkpoint::causal(ck.dims, ck.params, a.clone()).save(&self.run.graph_checkpoint())?;
        write_text(&self.run.causal_adjacency(), &format_csv(&a, Some(&ds.tags)))?;
        write_text(&self.run.stage_losses("graph"), &losses_csv(&res.history, false))?;
        rebuild_losses(&self.run)?;
        let discrete = truncate_graph(&a, self.cfg.diagnosis.delta)?;
        let score = self
            .truth()?
            .map(|t| edge_scores(&discrete, &t))
            .transpose()?;
        let gm = GraphMetrics {
            delta: self.cfg.diagnosis.delta,
            edges: discrete.edge_count(),
            score,
        };
        write_json(&self.run.graph_metrics(), &gm)?;
        Ok(gm)
    }

    /// Step 3. Needs the causal-graph checkpoint.
    pub fn stage_finetune(&self) -> Result<FinetuneSummary> {
        self.run.require(&self.run.graph_checkpoint())?;
        let ck = Checkpoint::load(&self.run.graph_checkpoint())?;
        let a = ck
            .causal_graph
            .clone()
            .ok_or_else(|| CgstaeError::State("graph checkpoint lacks a causal graph".into()))?;
        let (ds, _) = self.normalized_train()?;
        let (_, train, val) = self.windows(&ds)?;
        let tcfg = self.cfg.effective_train();
        let res = finetune(&train, &val, &ck.params, &a, &tcfg)?;
        let mut params = ck.params;
        params.stae = res.stae;
        Checkpoint::causal(ck.dims, params, a).save(&self.run.finetune_checkpoint())?;
        write_text(&self.run.stage_losses("finetune"), &losses_csv(&res.history, false))?;
        rebuild_losses(&self.run)?;
        let pretrain_val = read_pretrain_val(&self.run)?;
        let summary = FinetuneSummary {
            pretrain_val,
            finetune_initial_val: res.initial_val,
            finetune_best_val: res.best_val,
        };
        write_json(&self.run.finetune_summary(), &summary)?;
        Ok(summary)
    }

    /// Fits the monitoring statistics on all training windows.
    pub fn stage_monitor(&self) -> Result<MonitorModel> {
        self.run.require(&self.run.finetune_checkpoint())?;
        let ck = Checkpoint::load(&self.run.finetune_checkpoint())?;
        if ck.mode != CheckpointMode::Causal {
            return Err(CgstaeError::State("monitoring needs a causal-mode checkpoint".into()));
        }
        let a = ck.causal_graph.clone().unwrap_or_else(|| Matrix::zeros(ck.dims.n, ck.dims.n));
        let (ds, norm) = self.normalized_train()?;
        let (all, _, _) = self.windows(&ds)?;
        let cal = calibrate(ck.params, a, &all, self.cfg.monitor.significance)?;
        let model = cal.model.with_normalizer(norm)?;
        model.save(&self.run.monitor_model())?;
        Ok(model)
    }

    fn load_monitor(&self) -> Result<MonitorModel> {
        self.run.require(&self.run.monitor_model())?;
        MonitorModel::load(&self.run.monitor_model())
    }

    fn normalized_test(&self, model: &MonitorModel, mut ds: Dataset) -> Result<Dataset> {
        let norm = model
            .normalizer
            .as_ref()
            .ok_or_else(|| CgstaeError::State("monitor model has no normalizer".into()))?;
        ds.normalize(norm)?;
        Ok(ds)
    }

    /// Detection on every test set: traces, plots and the metrics table.
    pub fn stage_evaluate(&self) -> Result<EvaluationMetrics> {
        let model = self.load_monitor()?;
        let tests = self.test_datasets()?;
        if tests.is_empty() {
            return Err(CgstaeError::Config("no test sets configured".into()));
        }
        let rows = tests
            .into_par_iter()
            .map(|(name, ds)| {
                let ds = self.normalized_test(&model, ds)?;
                let mut trace = detect(&ds.series, &model)?;
                let onset = ds.onset;
                trace = trace.with_onset(onset.unwrap_or(ds.len()))?;
                write_text(&self.run.trace(&name), &trace.to_csv())?;
                write_text(&self.run.plot(&name), &trace_svg(&trace, &name))?;
                let s = score(&trace, onset.unwrap_or(ds.len()))?;
                Ok(FaultMetrics {
                    name,
                    onset,
                    score: s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let faulty: Vec<&FaultMetrics> = rows.iter().filter(|r| r.score.faulty > 0).collect();
        let mean = |f: &dyn Fn(&FaultMetrics) -> f64| {
            if faulty.is_empty() {
                0.0
            } else {
                faulty.iter().map(|r| f(r)).sum::<f64>() / faulty.len() as f64
            }
        };
        let average = AverageMetrics {
            fdr: mean(&|r| r.score.fdr),
            far: mean(&|r| r.score.far),
            f1: mean(&|r| r.score.f1),
        };
        let normal: Vec<&FaultMetrics> = rows.iter().filter(|r| r.score.faulty == 0).collect();
        let normal_alarm_rate = (!normal.is_empty()).then(|| {
            let alarms: usize = normal.iter().map(|r| r.score.false_alarms).sum();
            let samples: usize = normal.iter().map(|r| r.score.normal).sum();
            alarms as f64 / samples.max(1) as f64
        });
        let metrics = EvaluationMetrics {
            significance: model.significance,
            alpha_t2: model.alpha_t2,
            alpha_spe: model.alpha_spe,
            faults: rows,
            average,
            normal_alarm_rate,
        };
        write_json(&self.run.metrics(), &metrics)?;
        write_text(&self.run.metrics_table(), &metrics_table(&metrics))?;
        Ok(metrics)
    }

    /// Root-cause analysis for one named test set.
    pub fn stage_diagnose(&self, name: &str) -> Result<DiagnosisReport> {
        let model = self.load_monitor()?;
        let (_, ds) = self
            .test_datasets()?
            .into_iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| CgstaeError::Argument(format!("unknown test set {name:?}")))?;
        let tags = ds.tags.clone();
        let ds = self.normalized_test(&model, ds)?;
        let trace = detect(&ds.series, &model)?;
        let from = ds.onset.unwrap_or(0);
        let interval = alarm_interval(&trace, from)
            .ok_or_else(|| CgstaeError::State(format!("no alarm in {name:?} to diagnose")))?;
        let contribs = contribution_trace(&ds.series, &model)?;
        let fault = fault_variable_set(&contribs, interval.0, interval.1, model.alpha_spe)?;
        if fault.variables.is_empty() {
            return Err(CgstaeError::State(format!(
                "no variable contribution exceeds alpha_SPE in {name:?}"
            )));
        }
        let g = truncate_graph(&model.causal_graph, self.cfg.diagnosis.delta)?;
        let sub = optimal_subgraph(&g, &fault.variables, self.cfg.diagnosis.mode)?;
        let report = DiagnosisReport::new(
            interval,
            self.cfg.diagnosis.delta,
            model.alpha_spe,
            &fault,
            &sub,
            &tags,
        );
        write_json(&self.run.diagnosis(name, "json"), &report)?;
        write_text(&self.run.diagnosis(name, "dot"), &report.to_dot(&tags))?;
        write_text(&self.run.diagnosis(name, "svg"), &subgraph_svg(&report, &tags))?;
        Ok(report)
    }

    /// All stages through evaluation.
    pub fn run_all(&self) -> Result<RunSummary> {
        self.stage_train()?;
        let graph = self.stage_graph()?;
        let finetune = self.stage_finetune()?;
        self.stage_monitor()?;
        let metrics = self.stage_evaluate()?;
        Ok(RunSummary {
            ablation: self.cfg.run.ablation,
            graph,
            finetune,
            average: metrics.average,
        })
    }
}

fn read_pretrain_val(run: &RunDir) -> Result<f64> {
    let p = run.stage_losses("pretrain");
    run.require(&p)?;
    let text = std::fs::read_to_string(&p).map_err(|e| CgstaeError::io(&p, e))?;
    text.lines()
        .filter_map(|l| l.rsplit(',').next()?.parse::<f64>().ok())
        .fold(None, |best: Option<f64>, v| Some(best.map_or(v, |b| b.min(v))))
        .ok_or_else(|| CgstaeError::State("empty pre-training loss log".into()))
}

pub fn metrics_table(m: &EvaluationMetrics) -> String {
    let mut s = String::from("name,fdr,far,f1\n");
    for r in &m.faults {
        s.push_str(&format!("{},{},{},{}\n", r.name, r.score.fdr, r.score.far, r.score.f1));
    }
    s.push_str(&format!(
        "average,{},{},{}\n",
        m.average.fdr, m.average.far, m.average.f1
    ));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ablation: Ablation,
    pub graph: GraphMetrics,
    pub finetune: FinetuneSummary,
    pub average: AverageMetrics,
}

/// Runs every ablation variant in `<run>/ablation/<variant>` and tabulates.
pub fn run_ablations(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let base = RunDir::new(cfg.run.dir.clone());
    base.create()?;
    let mut out = Vec::new();
    for variant in Ablation::ALL {
        let mut c = cfg.clone();
        c.run.ablation = variant;
        c.run.dir = base.path(&format!("ablation/{}", variant.as_str()));
        out.push(Experiment::new(c).run_all()?);
    }
    write_json(&base.path("ablation.json"), &out)?;
    let mut table = String::from("variant,fdr,far,f1,edge_f1\n");
    for r in &out {
        let ef = r.graph.score.map_or("NA".to_string(), |s| format!("{}", s.f1));
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            r.ablation.as_str(),
            r.average.fdr,
            r.average.far,
            r.average.f1,
            ef
        ));
    }
    write_text(&base.path("ablation.csv"), &table)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_scores_ignore_diagonal() {
        let truth = Matrix::from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        let g = DiscreteCausalGraph::from_edges(3, &[(0, 0), (0, 1), (2, 1)]).unwrap();
        let s = edge_scores(&g, &truth).unwrap();
        assert_eq!((s.true_positive, s.false_positive, s.false_negative), (1, 1, 1));
        assert!((s.f1 - 0.5).abs() < 1e-12);
    }
}
