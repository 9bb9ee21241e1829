use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::TrainConfig;
use super::losses::{
    grad_discrete, grad_invariance, grad_prior, grad_sparsity, loss_discrete, loss_invariance,
    loss_prior, loss_sparsity, window_sq_error,
};
use super::optimizer::Sgd;
use super::prior::PriorGraph;
use crate::error::{CgstaeError, Result};
use crate::model::{
    backward, forward_traced, model_forward, ssam_forward, CgstaeParams, GraphMode, ModelDims,
    ParamSet, StaeParams, WindowBatch,
};
use crate::numerics::{logit, sigmoid, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Graph,
    Finetune,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Graph => "graph",
            Stage::Finetune => "finetune",
        }
    }

    fn seed_offset(&self) -> u64 {
        match self {
            Stage::Pretrain => 0x51,
            Stage::Graph => 0x52,
            Stage::Finetune => 0x53,
        }
    }
}

/// One row of the per-epoch loss log. Reconstruction and invariance values
/// are means per window; the regularizers are evaluated once per batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub mse: f64,
    pub invariance: Option<f64>,
    pub prior: Option<f64>,
    pub sparsity: Option<f64>,
    pub discrete: Option<f64>,
    pub total: f64,
    pub val: f64,
}

/// Trainable causal adjacency, parametrized as `A = σ(logits)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraphParam {
    pub logits: Matrix,
}

impl CausalGraphParam {
    pub fn adjacency(&self) -> Matrix {
        self.logits.map(sigmoid)
    }

    /// Logits of `a`, clamped to `[-LOGIT_BOUND, LOGIT_BOUND]`.
    pub fn from_adjacency(a: &Matrix) -> Self {
        Self {
            logits: a.map(|v| logit(v).clamp(-LOGIT_BOUND, LOGIT_BOUND)),
        }
    }
}

/// Initial logits are kept inside σ⁻¹ of roughly [0.018, 0.982].
pub const LOGIT_BOUND: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct PretrainResult {
    pub params: CgstaeParams,
    pub history: Vec<EpochRecord>,
    pub best_val: f64,
}

#[derive(Debug, Clone)]
pub struct GraphResult {
    pub graph: CausalGraphParam,
    pub history: Vec<EpochRecord>,
    pub best_val: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    pub stae: StaeParams,
    pub history: Vec<EpochRecord>,
    /// causal-mode validation MSE (per window) before any update
    pub initial_val: f64,
    pub best_val: f64,
}

/// Loss components of the causal-graph objective over a set of windows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GraphLossParts {
    pub mse: f64,
    pub invariance: f64,
    pub prior: f64,
    pub sparsity: f64,
    pub discrete: f64,
    pub total: f64,
}

struct EarlyStop {
    best: f64,
    bad_epochs: usize,
    patience: usize,
}

impl EarlyStop {
    fn new(patience: usize, baseline: f64) -> Self {
        Self {
            best: baseline,
            bad_epochs: 0,
            patience,
        }
    }

    /// Returns (improved, stop).
    fn observe(&mut self, val: f64) -> (bool, bool) {
        if val < self.best {
            self.best = val;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs >= self.patience)
        }
    }
}

fn shuffled_batches(len: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(|c| c.to_vec()).collect()
}

fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CgstaeError::Numeric(format!("non-finite {what}; aborting")))
    }
}

/// Summed squared reconstruction error over `windows` and its gradient.
///
/// Per-window forward/backward passes run in parallel; results are reduced
/// sequentially in window order so the sum is deterministic. The returned
/// adjacency gradient is only meaningful in causal mode.
pub fn reconstruction_loss_and_grad(
    params: &CgstaeParams,
    windows: &[&Matrix],
    mode: GraphMode<'_>,
) -> Result<(f64, CgstaeParams, Matrix)> {
    let n = params.ssam.n();
    let per_window: Vec<_> = windows
        .par_iter()
        .map(|x| -> Result<_> {
            let trace = forward_traced(x, mode, params)?;
            let diff = trace.output.reconstruction.sub(x)?;
            let loss: f64 = diff.as_slice().iter().map(|v| v * v).sum();
            let grads = backward(&trace, x, params, &diff.scale(2.0))?;
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let dims = ModelDims::new(n, windows.first().map_or(1, |w| w.rows()), params.stae.d_h())?;
    let mut total = CgstaeParams::zeros(dims);
    let mut d_adj = Matrix::zeros(n, n);
    let mut loss = 0.0;
    for (l, g) in per_window {
        loss += l;
        if let Some(s) = &g.ssam {
            total.ssam.accumulate(1.0, s)?;
        }
        total.stae.accumulate(1.0, &g.stae)?;
        d_adj.axpy(1.0, &g.adjacency)?;
    }
    Ok((loss, total, d_adj))
}

/// Mean per-window squared reconstruction error, forward only.
pub fn mean_reconstruction_error(
    params: &CgstaeParams,
    windows: &[Matrix],
    mode: GraphMode<'_>,
) -> Result<f64> {
    if windows.is_empty() {
        return Err(CgstaeError::Argument("no windows to evaluate".into()));
    }
    let errs = windows
        .par_iter()
        .map(|x| window_sq_error(&model_forward(x, mode, params)?.reconstruction, x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / windows.len() as f64)
}

/// Causal-graph objective over `windows` (with their correlation graphs) and
/// its gradient w.r.t. the logits. Sums are unnormalized.
pub fn graph_objective(
    params: &CgstaeParams,
    graph: &CausalGraphParam,
    windows: &[&Matrix],
    correlation_graphs: &[&Matrix],
    prior: &PriorGraph,
    lambda: &[f64; 4],
) -> Result<(GraphLossParts, Matrix)> {
    let a = graph.adjacency();
    let (mse, _, d_mse) = reconstruction_loss_and_grad(params, windows, GraphMode::Causal(&a))?;
    let parts = regularizer_parts(&a, mse, correlation_graphs, prior, lambda)?;
    let mut d_a = d_mse;
    d_a.axpy(lambda[0], &grad_invariance(&a, correlation_graphs)?)?;
    d_a.axpy(lambda[1], &grad_prior(&a, prior)?)?;
    d_a.axpy(lambda[2], &grad_sparsity(&a, prior)?)?;
    d_a.axpy(lambda[3], &grad_discrete(&a))?;
    let d_logits = d_a.zip_map(&a, |g, v| g * v * (1.0 - v))?;
    Ok((parts, d_logits))
}

fn regularizer_parts<M: std::borrow::Borrow<Matrix>>(
    a: &Matrix,
    mse: f64,
    corr: &[M],
    prior: &PriorGraph,
    lambda: &[f64; 4],
) -> Result<GraphLossParts> {
    let invariance = loss_invariance(a, corr)?;
    let prior_l = loss_prior(a, prior)?;
    let sparsity = loss_sparsity(a, prior)?;
    let discrete = loss_discrete(a);
    let total = mse
        + lambda[0] * invariance
        + lambda[1] * prior_l
        + lambda[2] * sparsity
        + lambda[3] * discrete;
    Ok(GraphLossParts {
        mse,
        invariance,
        prior: prior_l,
        sparsity,
        discrete,
        total,
    })
}

/// Step scale turning the summed reconstruction gradient into a per-entry
/// mean. Under the plain sum the decoder bias has curvature 2·w·n per window,
/// which makes gradient descent at the usual learning rates diverge.
fn element_scale(xs: &[&Matrix]) -> f64 {
    let per_window = xs.first().map_or(1, |x| x.rows() * x.cols());
    1.0 / (xs.len() * per_window) as f64
}

fn refs<'a>(windows: &'a [Matrix], idx: &[usize]) -> Vec<&'a Matrix> {
    idx.iter().map(|&i| &windows[i]).collect()
}

/// Step 1: fit θ_SSAM and θ_STAE to reconstruct windows through the
/// correlation graph. Returns the best-validation parameters.
pub fn pretrain(
    train: &WindowBatch,
    val: &WindowBatch,
    init: CgstaeParams,
    cfg: &TrainConfig,
) -> Result<PretrainResult> {
    cfg.validate()?;
    let mut params = init;
    let mut best = params.clone();
    let mut opt = Sgd::new(cfg.lr_pretrain, cfg.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ Stage::Pretrain.seed_offset());
    let mut stop = EarlyStop::new(cfg.patience, f64::INFINITY);
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs_pretrain {
        let mut epoch_loss = 0.0;
        for batch in shuffled_batches(train.len(), cfg.batch_size, &mut rng) {
            let xs = refs(train.windows(), &batch);
            let (loss, grads, _) = reconstruction_loss_and_grad(&params, &xs, GraphMode::Correlation)?;
            epoch_loss += ensure_finite(loss, "pre-training loss")?;
            opt.step(&mut params, &grads, element_scale(&xs))?;
        }
        let val_mse = ensure_finite(
            mean_reconstruction_error(&params, val.windows(), GraphMode::Correlation)?,
            "validation loss",
        )?;
        let mse = epoch_loss / train.len() as f64;
        history.push(EpochRecord {
            epoch,
            stage: Stage::Pretrain,
            mse,
            invariance: None,
            prior: None,
            sparsity: None,
            discrete: None,
            total: mse,
            val: val_mse,
        });
        log::debug!("pretrain epoch {epoch}: train {mse:.6} val {val_mse:.6}");
        let (improved, halt) = stop.observe(val_mse);
        if improved {
            best = params.clone();
        }
        if halt {
            break;
        }
    }
    Ok(PretrainResult {
        params: best,
        history,
        best_val: stop.best,
    })
}

/// Mean of the correlation graphs of (up to) `count` evenly spaced windows.
pub fn mean_correlation_graph(
    params: &CgstaeParams,
    windows: &[Matrix],
    count: usize,
) -> Result<Matrix> {
    if windows.is_empty() {
        return Err(CgstaeError::Argument("no windows for the mean graph".into()));
    }
    let count = count.clamp(1, windows.len());
    let step = windows.len() as f64 / count as f64;
    let n = params.ssam.n();
    let mut acc = Matrix::zeros(n, n);
    for k in 0..count {
        let idx = (k as f64 * step) as usize;
        acc.axpy(1.0, &ssam_forward(&windows[idx], &params.ssam)?)?;
    }
    Ok(acc.scale(1.0 / count as f64))
}

/// Step 2: learn the causal adjacency with θ frozen.
///
/// `params` is only read; the correlation graphs of all windows are computed
/// once up front since θ_SSAM cannot change.
pub fn learn_causal_graph(
    train: &WindowBatch,
    val: &WindowBatch,
    params: &CgstaeParams,
    prior: Option<&PriorGraph>,
    cfg: &TrainConfig,
) -> Result<GraphResult> {
    cfg.validate()?;
    let n = params.ssam.n();
    let unknown;
    let prior = match prior {
        Some(p) => {
            if p.n() != n {
                return Err(CgstaeError::Dimension(format!(
                    "prior of n={} for a model with n={}",
                    p.n(),
                    n
                )));
            }
            p
        }
        None => {
            log::warn!("no prior graph supplied; treating every entry as unknown");
            unknown = PriorGraph::all_unknown(n);
            &unknown
        }
    };
    let corr_of = |b: &WindowBatch| -> Result<Vec<Matrix>> {
        b.windows()
            .par_iter()
            .map(|x| ssam_forward(x, &params.ssam))
            .collect()
    };
    let train_corr = corr_of(train)?;
    let val_corr = corr_of(val)?;

    let init = mean_correlation_graph(params, train.windows(), cfg.graph_init_windows)?;
    let mut graph = CausalGraphParam::from_adjacency(&init);
    let mut best = graph.clone();
    let mut opt = Sgd::new(cfg.lr_graph, cfg.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ Stage::Graph.seed_offset());
    let mut stop = EarlyStop::new(cfg.patience, f64::INFINITY);
    let mut history = Vec::new();

    for epoch in 1..=cfg.epochs_graph {
        let mut sums = GraphLossParts::default();
        let mut batches = 0usize;
        for batch in shuffled_batches(train.len(), cfg.batch_size, &mut rng) {
            let xs = refs(train.windows(), &batch);
            let cs = refs(&train_corr, &batch);
            let (parts, d_logits) = graph_objective(params, &graph, &xs, &cs, prior, &cfg.lambda)?;
            ensure_finite(parts.total, "causal-graph objective")?;
            sums.mse += parts.mse;
            sums.invariance += parts.invariance;
            sums.prior += parts.prior;
            sums.sparsity += parts.sparsity;
            sums.discrete += parts.discrete;
            sums.total += parts.total;
            batches += 1;
            opt.step_matrix(&mut graph.logits, &d_logits, 1.0 / batch.len() as f64)?;
        }
        let a = graph.adjacency();
        let val_mse = mean_reconstruction_error(params, val.windows(), GraphMode::Causal(&a))?
            * val.len() as f64;
        let val_parts = regularizer_parts(&a, val_mse, &val_corr, prior, &cfg.lambda)?;
        let val_total = ensure_finite(val_parts.total, "validation objective")?;
        let per_window = train.len() as f64;
        let per_batch = batches as f64;
        history.push(EpochRecord {
            epoch,
            stage: Stage::Graph,
            mse: sums.mse / per_window,
            invariance: Some(sums.invariance / per_window),
            prior: Some(sums.prior / per_batch),
            sparsity: Some(sums.sparsity / per_batch),
            discrete: Some(sums.discrete / per_batch),
            total: sums.total / per_batch,
            val: val_total,
        });
        log::debug!("graph epoch {epoch}: total {:.6} val {val_total:.6}", sums.total / per_batch);
        let (improved, halt) = stop.observe(val_total);
        if improved {
            best = graph.clone();
        }
        if halt {
            break;
        }
    }
    Ok(GraphResult {
        graph: best,
        history,
        best_val: stop.best,
    })
}

/// Step 3: refine θ_STAE on the fixed causal graph; the attention module is
/// not on the computation path. The starting parameters compete for "best",
/// so validation error never gets worse than at entry.
pub fn finetune(
    train: &WindowBatch,
    val: &WindowBatch,
    params: &CgstaeParams,
    causal_graph: &Matrix,
    cfg: &TrainConfig,
) -> Result<FinetuneResult> {
    cfg.validate()?;
    let mode = GraphMode::Causal(causal_graph);
    let mut current = params.clone();
    let initial_val = ensure_finite(
        mean_reconstruction_error(&current, val.windows(), mode)?,
        "validation loss",
    )?;
    let mut best = current.stae.clone();
    let mut opt = Sgd::new(cfg.lr_finetune, cfg.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ Stage::Finetune.seed_offset());
    let mut stop = EarlyStop::new(cfg.patience, initial_val);
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs_finetune {
        let mut epoch_loss = 0.0;
        for batch in shuffled_batches(train.len(), cfg.batch_size, &mut rng) {
            let xs = refs(train.windows(), &batch);
            let (loss, grads, _) = reconstruction_loss_and_grad(&current, &xs, mode)?;
            epoch_loss += ensure_finite(loss, "fine-tuning loss")?;
            opt.step(&mut current.stae, &grads.stae, element_scale(&xs))?;
        }
        let val_mse = ensure_finite(
            mean_reconstruction_error(&current, val.windows(), mode)?,
            "validation loss",
        )?;
        let mse = epoch_loss / train.len() as f64;
        history.push(EpochRecord {
            epoch,
            stage: Stage::Finetune,
            mse,
            invariance: None,
            prior: None,
            sparsity: None,
            discrete: None,
            total: mse,
            val: val_mse,
        });
        let (improved, halt) = stop.observe(val_mse);
        if improved {
            best = current.stae.clone();
        }
        if halt {
            break;
        }
    }
    Ok(FinetuneResult {
        stae: best,
        history,
        initial_val,
        best_val: stop.best,
    })
}
