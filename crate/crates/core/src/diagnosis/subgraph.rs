use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Binary adjacency `Ã_ij = [A_ij > δ]`, i → j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteCausalGraph {
    pub n: usize,
    pub delta: f64,
    edges: Vec<bool>,
}

pub const DEFAULT_DELTA: f64 = 0.1;

pub fn truncate_graph(a: &Matrix, delta: f64) -> Result<DiscreteCausalGraph> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CgstaeError::Argument(format!("δ must lie in (0,1), got {delta}")));
    }
    if !a.is_square() {
        return Err(CgstaeError::Dimension(format!("adjacency is {:?}", a.shape())));
    }
    Ok(DiscreteCausalGraph {
        n: a.rows(),
        delta,
        edges: a.as_slice().iter().map(|&v| v > delta).collect(),
    })
}

impl DiscreteCausalGraph {
    pub fn from_edges(n: usize, list: &[(usize, usize)]) -> Result<Self> {
        let mut edges = vec![false; n * n];
        for &(i, j) in list {
            if i >= n || j >= n {
                return Err(CgstaeError::Argument(format!("edge ({i},{j}) outside n={n}")));
            }
            edges[i * n + j] = true;
        }
        Ok(Self { n, delta: 0.5, edges })
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.n + j]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|e| **e).count()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| f64::from(u8::from(self.has_edge(i, j))))
    }

    /// Undirected neighbours, self-loops excluded, ascending.
    fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| u != v && (self.has_edge(v, u) || self.has_edge(u, v)))
    }

    /// Whether the subgraph induced by `nodes` is weakly connected.
    pub fn weakly_connected(&self, nodes: &[usize]) -> bool {
        let Some(&start) = nodes.first() else {
            return true;
        };
        let mut inside = vec![false; self.n];
        for &v in nodes {
            inside[v] = true;
        }
        let mut seen = vec![false; self.n];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for u in self.neighbours(v) {
                if inside[u] && !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == nodes.len()
    }

    /// Weakly connected component label per node.
    fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for u in self.neighbours(v) {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// exact when at most [`EXACT_LIMIT`] normal nodes are candidates
    Auto,
    Exact,
    Greedy,
}

pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultSubgraph {
    /// ascending node indices
    pub nodes: Vec<usize>,
    pub fault_nodes: Vec<usize>,
    /// induced directed edges, self-loops excluded
    pub edges: Vec<(usize, usize)>,
    /// zero in-degree within `nodes`, ascending
    pub sources: Vec<usize>,
    pub normal_count: usize,
    /// fault nodes span several components of the full graph
    pub disconnected: bool,
    pub exact: bool,
}

impl FaultSubgraph {
    /// Sources ordered by first excess time (unknown last), then index.
    pub fn ranked_sources(&self, first_excess: &[Option<usize>]) -> Vec<usize> {
        let mut s = self.sources.clone();
        s.sort_by_key(|&v| (first_excess.get(v).copied().flatten().unwrap_or(usize::MAX), v));
        s
    }
}

/// Smallest set of normal nodes that makes `fault` weakly connected.
///
/// Fault nodes lying in different components of the full graph are solved
/// per component and the union is returned with `disconnected` set.
pub fn optimal_subgraph(
    g: &DiscreteCausalGraph,
    fault: &[usize],
    mode: SearchMode,
) -> Result<FaultSubgraph> {
    if fault.is_empty() {
        return Err(CgstaeError::Argument("fault variable set is empty".into()));
    }
    if let Some(&bad) = fault.iter().find(|&&v| v >= g.n) {
        return Err(CgstaeError::Argument(format!("fault node {bad} not in graph of n={}", g.n)));
    }
    let mut fault: Vec<usize> = fault.to_vec();
    fault.sort_unstable();
    fault.dedup();
    let label = g.components();
    let mut groups: Vec<usize> = fault.iter().map(|&v| label[v]).collect();
    groups.sort_unstable();
    groups.dedup();
    let disconnected = groups.len() > 1;
    if disconnected {
        log::warn!(
            "fault variables span {} disconnected parts of the causal graph",
            groups.len()
        );
    }
    let mut nodes = Vec::new();
    let mut all_exact = true;
    for comp in groups {
        let f: Vec<usize> = fault.iter().copied().filter(|&v| label[v] == comp).collect();
        let normals: Vec<usize> = (0..g.n)
            .filter(|&v| label[v] == comp && f.binary_search(&v).is_err())
            .collect();
        let exact = match mode {
            SearchMode::Exact => true,
            SearchMode::Greedy => false,
            SearchMode::Auto => normals.len() <= EXACT_LIMIT,
        };
        all_exact &= exact;
        let part = if exact {
            exact_cover(g, &f, &normals)
        } else {
            greedy_cover(g, &f)
        };
        nodes.extend(part);
    }
    nodes.sort_unstable();
    Ok(assemble(g, nodes, fault, disconnected, all_exact))
}

fn assemble(
    g: &DiscreteCausalGraph,
    nodes: Vec<usize>,
    fault: Vec<usize>,
    disconnected: bool,
    exact: bool,
) -> FaultSubgraph {
    let mut edges = Vec::new();
    for &i in &nodes {
        for &j in &nodes {
            if i != j && g.has_edge(i, j) {
                edges.push((i, j));
            }
        }
    }
    let sources = nodes
        .iter()
        .copied()
        .filter(|&v| !edges.iter().any(|&(_, j)| j == v))
        .collect();
    let normal_count = nodes.len() - fault.len();
    FaultSubgraph {
        nodes,
        fault_nodes: fault,
        edges,
        sources,
        normal_count,
        disconnected,
        exact,
    }
}

/// Enumerates normal-node subsets by size, in lexicographic order within a size.
fn exact_cover(g: &DiscreteCausalGraph, fault: &[usize], normals: &[usize]) -> Vec<usize> {
    for k in 0..=normals.len() {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let mut s: Vec<usize> = fault.to_vec();
            s.extend(idx.iter().map(|&i| normals[i]));
            if g.weakly_connected(&s) {
                s.sort_unstable();
                return s;
            }
            if !next_combination(&mut idx, normals.len()) {
                break;
            }
        }
    }
    // unreachable when fault nodes share a component: the whole component works
    let mut s: Vec<usize> = fault.iter().chain(normals).copied().collect();
    s.sort_unstable();
    s
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Grows a connected set from the smallest fault node by repeatedly adding a
/// cheapest path (counting normal nodes) to the nearest unconnected fault
/// node, then drops added normal nodes that are not needed.
fn greedy_cover(g: &DiscreteCausalGraph, fault: &[usize]) -> Vec<usize> {
    let n = g.n;
    let is_fault = |v: usize| fault.binary_search(&v).is_ok();
    let mut inside = vec![false; n];
    inside[fault[0]] = true;
    loop {
        // absorb fault nodes already adjacent through the current set
        let mut grew = true;
        while grew {
            grew = false;
            for &f in fault {
                if !inside[f] && g.neighbours(f).any(|u| inside[u]) {
                    inside[f] = true;
                    grew = true;
                }
            }
        }
        if fault.iter().all(|&f| inside[f]) {
            break;
        }
        // 0-1 BFS: entering a normal node outside the set costs 1
        let mut dist = vec![usize::MAX; n];
        let mut prev = vec![usize::MAX; n];
        let mut dq = VecDeque::new();
        for v in 0..n {
            if inside[v] {
                dist[v] = 0;
                dq.push_back(v);
            }
        }
        while let Some(v) = dq.pop_front() {
            for u in g.neighbours(v) {
                let w = usize::from(!inside[u] && !is_fault(u));
                if dist[v] + w < dist[u] {
                    dist[u] = dist[v] + w;
                    prev[u] = v;
                    if w == 0 {
                        dq.push_front(u);
                    } else {
                        dq.push_back(u);
                    }
                }
            }
        }
        let target = fault
            .iter()
            .copied()
            .filter(|&f| !inside[f] && dist[f] != usize::MAX)
            .min_by_key(|&f| (dist[f], f));
        let Some(mut v) = target else {
            // remaining fault nodes are unreachable; caller splits components
            for &f in fault {
                inside[f] = true;
            }
            break;
        };
        while !inside[v] {
            inside[v] = true;
            v = prev[v];
        }
    }
    let mut nodes: Vec<usize> = (0..n).filter(|&v| inside[v]).collect();
    for v in nodes.clone().into_iter().rev() {
        if is_fault(v) {
            continue;
        }
        let trial: Vec<usize> = nodes.iter().copied().filter(|&u| u != v).collect();
        if g.weakly_connected(&trial) {
            nodes = trial;
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncation_thresholds() {
        let a = Matrix::from_rows(&[&[0.2, 0.5], &[0.05, 0.9]]);
        assert_eq!(truncate_graph(&a, 0.04).unwrap().edge_count(), 4);
        assert_eq!(truncate_graph(&a, 0.9).unwrap().edge_count(), 0);
        let g = truncate_graph(&a, 0.1).unwrap();
        assert!(g.has_edge(0, 0) && g.has_edge(0, 1) && !g.has_edge(1, 0));
        assert!(truncate_graph(&a, 0.0).is_err());
        assert!(truncate_graph(&a, 1.0).is_err());
    }

    #[test]
    fn edge_count_monotone_in_delta() {
        let a = Matrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 10) as f64 / 10.0 + 0.05);
        let mut prev = usize::MAX;
        for k in 1..20 {
            let c = truncate_graph(&a, k as f64 / 20.0).unwrap().edge_count();
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn connected_faults_need_no_extra_nodes() {
        let g = DiscreteCausalGraph::from_edges(4, &[(0, 1), (1, 2), (3, 2)]).unwrap();
        let s = optimal_subgraph(&g, &[0, 1, 2], SearchMode::Auto).unwrap();
        assert_eq!((s.nodes.clone(), s.normal_count), (vec![0, 1, 2], 0));
        assert_eq!(s.sources, vec![0]);
    }

    #[test]
    fn chain_fixture() {
        let g = DiscreteCausalGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        for mode in [SearchMode::Exact, SearchMode::Greedy] {
            let s = optimal_subgraph(&g, &[0, 2], mode).unwrap();
            assert_eq!(s.nodes, vec![0, 1, 2]);
            assert_eq!(s.sources, vec![0]);
            assert_eq!(s.edges, vec![(0, 1), (1, 2)]);
        }
    }

    #[test]
    fn lexicographic_tie_break() {
        // 0 and 3 connect through either 1 or 2
        let g = DiscreteCausalGraph::from_edges(4, &[(0, 2), (2, 3), (0, 1), (1, 3)]).unwrap();
        let s = optimal_subgraph(&g, &[0, 3], SearchMode::Exact).unwrap();
        assert_eq!(s.nodes, vec![0, 1, 3]);
    }

    #[test]
    fn disconnected_faults_are_flagged() {
        let g = DiscreteCausalGraph::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let s = optimal_subgraph(&g, &[0, 2, 4], SearchMode::Auto).unwrap();
        assert!(s.disconnected);
        assert_eq!(s.nodes, vec![0, 1, 2, 4]);
        assert_eq!(s.sources, vec![0, 4]);
    }

    #[test]
    fn ranking_by_first_excess() {
        let g = DiscreteCausalGraph::from_edges(4, &[(0, 1), (2, 1), (3, 1)]).unwrap();
        let s = optimal_subgraph(&g, &[0, 1, 2, 3], SearchMode::Auto).unwrap();
        assert_eq!(s.sources, vec![0, 2, 3]);
        let ranked = s.ranked_sources(&[Some(9), Some(1), Some(4), None]);
        assert_eq!(ranked, vec![2, 0, 3]);
    }

    #[test]
    fn twelve_variable_case_fixture() {
        // 1-based: V_fault = {1,2,3,4,6,7,10,12}; 4 drives the fault cluster
        let e1 = [(4, 1), (4, 2), (1, 3), (2, 6), (6, 7), (3, 5), (5, 10), (10, 12), (8, 9), (11, 9), (9, 12)];
        let edges: Vec<(usize, usize)> = e1.iter().map(|&(a, b)| (a - 1, b - 1)).collect();
        let g = DiscreteCausalGraph::from_edges(12, &edges).unwrap();
        let fault: Vec<usize> = [1, 2, 3, 4, 6, 7, 10, 12].iter().map(|v| v - 1).collect();
        let s = optimal_subgraph(&g, &fault, SearchMode::Auto).unwrap();
        assert_eq!(s.normal_count, 1);
        assert_eq!(s.sources, vec![3]);
    }

    #[test]
    fn greedy_is_feasible_and_never_better_than_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..150 {
            let n = rng.random_range(3..=12);
            let p = rng.random_range(0.1..0.4);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            let g = DiscreteCausalGraph::from_edges(n, &edges).unwrap();
            let k = rng.random_range(1..=n.min(4));
            let fault: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
            let ex = optimal_subgraph(&g, &fault, SearchMode::Exact).unwrap();
            let gr = optimal_subgraph(&g, &fault, SearchMode::Greedy).unwrap();
            assert!(ex.normal_count <= gr.normal_count);
            assert_eq!(ex.disconnected, gr.disconnected);
            for s in [&ex, &gr] {
                assert!(s.fault_nodes.iter().all(|f| s.nodes.contains(f)));
                if !s.disconnected {
                    assert!(g.weakly_connected(&s.nodes));
                }
                for &src in &s.sources {
                    assert!(!s.edges.iter().any(|&(_, j)| j == src));
                }
            }
        }
    }
}
