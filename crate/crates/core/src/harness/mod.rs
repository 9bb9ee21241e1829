//! Experiment harness: run directories, stage pipeline and report files.

mod gradcheck;
mod pipeline;
mod plot;
mod run;
mod synth_gen;

pub use pipeline::{
    edge_scores, metrics_table, run_ablations, AverageMetrics, EdgeScore, EvaluationMetrics,
    Experiment, FaultMetrics, FinetuneSummary, GraphMetrics, RunSummary,
};
pub use gradcheck::{model_gradcheck, ModelGradCheck};
pub use plot::{subgraph_svg, trace_svg};
pub use synth_gen::{write_synth_experiment, SynthOptions};
pub use run::{losses_csv, read_json, rebuild_losses, write_json, write_text, RunDir, LOSS_HEADER};
