//! Three-step causal graph structure learning: pre-training through the
//! correlation graph, causal-graph learning with θ frozen, and fine-tuning on
//! the learned graph.

mod config;
mod losses;
mod optimizer;
mod prior;
mod stages;

pub use config::TrainConfig;
pub use losses::{
    grad_discrete, grad_invariance, grad_prior, grad_sparsity, loss_discrete, loss_invariance,
    loss_mse, loss_prior, loss_sparsity,
};
pub use optimizer::Sgd;
pub use prior::{PriorEntry, PriorGraph};
pub use stages::{
    finetune, graph_objective, learn_causal_graph, mean_correlation_graph,
    mean_reconstruction_error, pretrain, reconstruction_loss_and_grad, CausalGraphParam,
    EpochRecord, FinetuneResult, GraphLossParts, GraphResult, PretrainResult, Stage, LOGIT_BOUND,
};
