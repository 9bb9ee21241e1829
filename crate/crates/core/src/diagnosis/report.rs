use std::fmt::Write as _;

use serde::Serialize;

use super::contribution::FaultSet;
use super::subgraph::FaultSubgraph;

/// Serializable diagnosis outcome; node indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisReport {
    pub interval: (usize, usize),
    pub delta: f64,
    pub alpha_spe: f64,
    pub fault_variables: Vec<usize>,
    pub fault_tags: Vec<String>,
    pub subgraph_nodes: Vec<usize>,
    pub subgraph_edges: Vec<(usize, usize)>,
    pub normal_count: usize,
    pub ranked_sources: Vec<usize>,
    pub ranked_source_tags: Vec<String>,
    pub first_excess: Vec<Option<usize>>,
    pub disconnected: bool,
    pub exact: bool,
}

impl DiagnosisReport {
    pub fn new(
        interval: (usize, usize),
        delta: f64,
        alpha_spe: f64,
        fault: &FaultSet,
        sub: &FaultSubgraph,
        tags: &[String],
    ) -> Self {
        let tag = |v: &usize| tags.get(*v).cloned().unwrap_or_else(|| format!("x{}", v + 1));
        let ranked = sub.ranked_sources(&fault.first_excess);
        Self {
            interval,
            delta,
            alpha_spe,
            fault_variables: fault.variables.clone(),
            fault_tags: fault.variables.iter().map(tag).collect(),
            subgraph_nodes: sub.nodes.clone(),
            subgraph_edges: sub.edges.clone(),
            normal_count: sub.normal_count,
            ranked_source_tags: ranked.iter().map(tag).collect(),
            ranked_sources: ranked,
            first_excess: fault.first_excess.clone(),
            disconnected: sub.disconnected,
            exact: sub.exact,
        }
    }

    /// Graphviz rendering: fault nodes filled, the top-ranked source doubled.
    pub fn to_dot(&self, tags: &[String]) -> String {
        let tag = |v: usize| tags.get(v).cloned().unwrap_or_else(|| format!("x{}", v + 1));
        let mut s = String::from("digraph fault_subgraph {\n  rankdir=LR;\n");
        for &v in &self.subgraph_nodes {
            let mut attrs = vec![format!("label=\"{}\"", tag(v))];
            if self.fault_variables.contains(&v) {
                attrs.push("style=filled".into());
                attrs.push("fillcolor=\"#f4b6b6\"".into());
            }
            if self.ranked_sources.first() == Some(&v) {
                attrs.push("shape=doublecircle".into());
            }
            let _ = writeln!(s, "  n{v} [{}];", attrs.join(", "));
        }
        for &(i, j) in &self.subgraph_edges {
            let _ = writeln!(s, "  n{i} -> n{j};");
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::{optimal_subgraph, DiscreteCausalGraph, SearchMode};

    #[test]
    fn report_and_dot() {
        let g = DiscreteCausalGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let sub = optimal_subgraph(&g, &[0, 2], SearchMode::Auto).unwrap();
        let fs = FaultSet {
            variables: vec![0, 2],
            first_excess: vec![Some(5), None, Some(7)],
        };
        let tags: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r = DiagnosisReport::new((5, 9), 0.1, 2.0, &fs, &sub, &tags);
        assert_eq!(r.ranked_source_tags, vec!["a"]);
        let dot = r.to_dot(&tags);
        assert!(dot.contains("n0 -> n1;") && dot.contains("doublecircle"));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["normal_count"], 1);
    }
}
