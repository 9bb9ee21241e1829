//! Root-cause analysis: per-variable contributions, the fault-variable set,
//! causal-graph truncation and the minimal connecting subgraph.

mod contribution;
mod report;
mod subgraph;

pub use contribution::{
    alarm_interval, contribution_trace, fault_variable_set, variable_contribution,
    ContributionTrace, FaultSet,
};
pub use report::DiagnosisReport;
pub use subgraph::{
    optimal_subgraph, truncate_graph, DiscreteCausalGraph, FaultSubgraph, SearchMode,
    DEFAULT_DELTA, EXACT_LIMIT,
};
