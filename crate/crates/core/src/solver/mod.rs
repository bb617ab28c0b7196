//! Exact 0-1 selection of pooled nodes and edges.
//!
//! The problem is: minimize the summed weights of the chosen nodes and edges,
//! such that every chosen edge has both endpoints chosen (when couplings are
//! present) and, optionally, the chosen edges form a DAG. Three solvers are
//! provided:
//!
//! * [`solve_transitive_closure`]: path indicators `b` for every ordered node
//!   pair with `x_e <= b_e`, transitivity `b_ik >= b_ij + b_jk - 1`, and
//!   `b_ii = 0`; branch-and-bound over the LP relaxation.
//! * [`solve_lazy_cycles`]: the same branch-and-bound without path variables,
//!   adding `sum x_e <= |C| - 1` for each directed cycle `C` found in an
//!   integral relaxation.
//! * [`brute_force`]: exhaustive enumeration for small instances.

mod bnb;
mod brute;
mod closure;
mod lazy;
mod lpformat;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

pub use brute::{brute_force, BRUTE_FORCE_MAX_ELEMENTS};
pub use closure::{solve_transitive_closure, CLOSURE_MAX_NODES};
pub use lazy::solve_lazy_cycles;
pub use lpformat::{to_lp_format, Formulation};

/// Absolute tolerance for comparing weights and objectives.
pub const WEIGHT_EPS: f64 = 1e-9;

pub type EdgePair = (NodeId, NodeId);

/// An edge may be chosen only if both `head` and `tail` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Coupling {
    pub edge: EdgePair,
    pub head: NodeId,
    pub tail: NodeId,
}

impl Coupling {
    pub fn for_edge(edge: EdgePair) -> Self {
        Self { edge, head: edge.0, tail: edge.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedSelectionProblem {
    pub node_weights: BTreeMap<NodeId, f64>,
    pub edge_weights: BTreeMap<EdgePair, f64>,
    pub couplings: Vec<Coupling>,
    pub require_dag: bool,
}

impl WeightedSelectionProblem {
    /// Every node mentioned by a weight or an edge, ascending.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut ids: BTreeSet<NodeId> = self.node_weights.keys().copied().collect();
        for &(h, t) in self.edge_weights.keys() {
            ids.insert(h);
            ids.insert(t);
        }
        ids.into_iter().collect()
    }

    pub fn element_count(&self) -> usize {
        self.node_weights.len() + self.edge_weights.len()
    }

    pub fn has_couplings(&self) -> bool {
        !self.couplings.is_empty()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        for c in &self.couplings {
            if !self.edge_weights.contains_key(&c.edge)
                || !self.node_weights.contains_key(&c.head)
                || !self.node_weights.contains_key(&c.tail)
            {
                return Err(SolverError::InvalidProblem(format!(
                    "coupling for edge ({}, {}) references an element without a weight",
                    c.edge.0, c.edge.1
                )));
            }
        }
        if let Some((k, _)) = self.node_weights.iter().find(|(_, w)| !w.is_finite()) {
            return Err(SolverError::InvalidProblem(format!("non-finite weight on node {k}")));
        }
        if let Some((k, _)) = self.edge_weights.iter().find(|(_, w)| !w.is_finite()) {
            return Err(SolverError::InvalidProblem(format!("non-finite weight on edge ({}, {})", k.0, k.1)));
        }
        Ok(())
    }

    fn has_negative_weight(&self) -> bool {
        self.node_weights.values().chain(self.edge_weights.values()).any(|&w| w < -WEIGHT_EPS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    Optimal,
    Heuristic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub bb_nodes: usize,
    pub lp_solves: usize,
    pub cuts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen_nodes: BTreeSet<NodeId>,
    pub chosen_edges: BTreeSet<EdgePair>,
    pub objective: f64,
    pub certificate: Certificate,
    pub stats: SolveStats,
}

impl Selection {
    pub fn empty() -> Self {
        Self {
            chosen_nodes: BTreeSet::new(),
            chosen_edges: BTreeSet::new(),
            objective: 0.0,
            certificate: Certificate::Optimal,
            stats: SolveStats::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("instance too large for {engine}: {size} exceeds the limit of {limit}")]
    Size { engine: &'static str, size: usize, limit: usize },
    #[error("solver budget exhausted; best selection found has objective {}", best.objective)]
    Timeout { best: Box<Selection> },
    #[error("infeasible selection: {0}")]
    InfeasibleSelection(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("LP relaxation failed: {0}")]
    Lp(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    LazyCycles,
    TransitiveClosure,
    BruteForce,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<Duration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<usize>,
}

pub fn solve(problem: &WeightedSelectionProblem, options: &SolverOptions) -> Result<Selection, SolverError> {
    match options.engine {
        Engine::LazyCycles => solve_lazy_cycles(problem, options),
        Engine::TransitiveClosure => solve_transitive_closure(problem, options),
        Engine::BruteForce => brute_force(problem),
    }
}

/// True when the directed graph over `edges` has no cycle (self-loops count).
pub fn edges_acyclic<'a>(edges: impl IntoIterator<Item = &'a EdgePair>) -> bool {
    find_cycle(edges).is_none()
}

/// Some directed cycle among `edges`, as its list of edges.
pub fn find_cycle<'a>(edges: impl IntoIterator<Item = &'a EdgePair>) -> Option<Vec<EdgePair>> {
    let mut succ: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(h, t) in edges {
        succ.entry(h).or_default().push(t);
        succ.entry(t).or_default();
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<NodeId, u8> = HashMap::new();
    let starts: Vec<NodeId> = succ.keys().copied().collect();
    for start in starts {
        if state.get(&start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(NodeId, usize)> = vec![(start, 0)];
        let mut path: Vec<NodeId> = vec![start];
        state.insert(start, 1);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let children = &succ[&node];
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                match state.get(&child).copied().unwrap_or(0) {
                    0 => {
                        state.insert(child, 1);
                        stack.push((child, 0));
                        path.push(child);
                    }
                    1 => {
                        let pos = path.iter().position(|&n| n == child).expect("on-stack node is on path");
                        let mut cycle: Vec<EdgePair> = path[pos..].windows(2).map(|w| (w[0], w[1])).collect();
                        cycle.push((node, child));
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

/// Sum of chosen weights, after checking the selection against the problem's
/// constraints.
pub fn objective_value(
    problem: &WeightedSelectionProblem,
    chosen_nodes: &BTreeSet<NodeId>,
    chosen_edges: &BTreeSet<EdgePair>,
) -> Result<f64, SolverError> {
    let mut total = 0.0;
    for n in chosen_nodes {
        total += problem
            .node_weights
            .get(n)
            .ok_or_else(|| SolverError::InfeasibleSelection(format!("node {n} is not part of the problem")))?;
    }
    for e in chosen_edges {
        total += problem.edge_weights.get(e).ok_or_else(|| {
            SolverError::InfeasibleSelection(format!("edge ({}, {}) is not part of the problem", e.0, e.1))
        })?;
    }
    for c in &problem.couplings {
        if chosen_edges.contains(&c.edge) && !(chosen_nodes.contains(&c.head) && chosen_nodes.contains(&c.tail)) {
            return Err(SolverError::InfeasibleSelection(format!(
                "edge ({}, {}) chosen without both endpoints",
                c.edge.0, c.edge.1
            )));
        }
    }
    if problem.require_dag && !edges_acyclic(chosen_edges) {
        return Err(SolverError::InfeasibleSelection("chosen edges contain a directed cycle".into()));
    }
    Ok(total)
}

/// Drops chosen elements whose weight is not negative, as long as feasibility
/// is kept. Zero-weight ties therefore resolve to exclusion.
pub(crate) fn sparsify(
    problem: &WeightedSelectionProblem,
    nodes: &mut BTreeSet<NodeId>,
    edges: &mut BTreeSet<EdgePair>,
) {
    edges.retain(|e| problem.edge_weights[e] < -WEIGHT_EPS);
    let needed: BTreeSet<NodeId> = if problem.has_couplings() {
        problem.couplings.iter().filter(|c| edges.contains(&c.edge)).flat_map(|c| [c.head, c.tail]).collect()
    } else {
        BTreeSet::new()
    };
    nodes.retain(|n| problem.node_weights[n] < -WEIGHT_EPS || needed.contains(n));
}

pub(crate) fn finish(
    problem: &WeightedSelectionProblem,
    mut nodes: BTreeSet<NodeId>,
    mut edges: BTreeSet<EdgePair>,
    certificate: Certificate,
    stats: SolveStats,
) -> Result<Selection, SolverError> {
    sparsify(problem, &mut nodes, &mut edges);
    let objective = objective_value(problem, &nodes, &edges)?;
    Ok(Selection { chosen_nodes: nodes, chosen_edges: edges, objective, certificate, stats })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn coupled(nodes: &[(u32, f64)], edges: &[((u32, u32), f64)], dag: bool) -> WeightedSelectionProblem {
        let mut p = WeightedSelectionProblem { require_dag: dag, ..Default::default() };
        for &(n, w) in nodes {
            p.node_weights.insert(NodeId(n), w);
        }
        for &((h, t), w) in edges {
            let e = (NodeId(h), NodeId(t));
            p.edge_weights.insert(e, w);
            p.couplings.push(Coupling::for_edge(e));
        }
        p
    }

    pub fn edges_only(edges: &[((u32, u32), f64)], dag: bool) -> WeightedSelectionProblem {
        let mut p = WeightedSelectionProblem { require_dag: dag, ..Default::default() };
        for &((h, t), w) in edges {
            p.edge_weights.insert((NodeId(h), NodeId(t)), w);
        }
        p
    }

    /// Random coupled instance: up to `max_nodes` nodes, up to `max_edges`
    /// distinct ordered pairs (self-loops excluded), weights uniform in [-1, 1].
    pub fn random_problem(seed: u64, max_nodes: u32, max_edges: usize, dag: bool) -> WeightedSelectionProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=max_nodes);
        let mut pairs: Vec<(u32, u32)> = (0..n).flat_map(|h| (0..n).map(move |t| (h, t))).filter(|(h, t)| h != t).collect();
        let m = rng.random_range(0..=max_edges.min(pairs.len()));
        let mut edges = Vec::new();
        for _ in 0..m {
            let i = rng.random_range(0..pairs.len());
            edges.push((pairs.swap_remove(i), rng.random_range(-1.0..=1.0)));
        }
        let nodes: Vec<(u32, f64)> = (0..n).map(|i| (i, rng.random_range(-1.0..=1.0))).collect();
        coupled(&nodes, &edges, dag)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    fn set<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
        items.iter().cloned().collect()
    }

    #[test]
    fn objective_of_empty_selection_is_zero() {
        let p = coupled(&[(0, 1.0)], &[], true);
        assert_eq!(objective_value(&p, &BTreeSet::new(), &BTreeSet::new()).unwrap(), 0.0);
    }

    #[test]
    fn objective_of_coupling_example() {
        let p = coupled(&[(1, -0.5), (2, 0.2)], &[((1, 2), -0.4)], true);
        let v = objective_value(&p, &set(&[NodeId(1), NodeId(2)]), &set(&[(NodeId(1), NodeId(2))])).unwrap();
        assert!((v + 0.7).abs() < 1e-12);
    }

    #[test]
    fn coupling_violation_is_infeasible() {
        let p = coupled(&[(1, -0.5), (2, 0.2)], &[((1, 2), -0.4)], true);
        let err = objective_value(&p, &set(&[NodeId(1)]), &set(&[(NodeId(1), NodeId(2))])).unwrap_err();
        assert!(matches!(err, SolverError::InfeasibleSelection(_)));
    }

    #[test]
    fn cycle_violation_is_infeasible() {
        let p = edges_only(&[((0, 1), -0.4), ((1, 0), -0.3)], true);
        let both = set(&[(NodeId(0), NodeId(1)), (NodeId(1), NodeId(0))]);
        assert!(objective_value(&p, &BTreeSet::new(), &both).is_err());
        let mut relaxed = p.clone();
        relaxed.require_dag = false;
        assert!(objective_value(&relaxed, &BTreeSet::new(), &both).is_ok());
    }

    #[test]
    fn find_cycle_reports_edges() {
        let e = |h, t| (NodeId(h), NodeId(t));
        assert_eq!(find_cycle(&[e(0, 1), e(1, 2)]), None);
        let c = find_cycle(&[e(0, 1), e(1, 2), e(2, 0), e(2, 3)]).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.contains(&e(2, 0)));
        assert_eq!(find_cycle(&[e(4, 4)]), Some(vec![e(4, 4)]));
    }

    #[test]
    fn validate_rejects_dangling_coupling() {
        let mut p = coupled(&[(0, 0.1)], &[], true);
        p.edge_weights.insert((NodeId(0), NodeId(1)), -0.5);
        p.couplings.push(Coupling::for_edge((NodeId(0), NodeId(1))));
        assert!(matches!(p.validate(), Err(SolverError::InvalidProblem(_))));
    }

    /// Oracle equivalence on random small instances: all engines agree on the
    /// optimal objective.
    #[test]
    fn engines_agree_with_oracle() {
        let opts = SolverOptions::default();
        for seed in 0..120 {
            for dag in [true, false] {
                let p = random_problem(seed, 6, 10, dag);
                let oracle = brute_force(&p).unwrap();
                let closure = solve_transitive_closure(&p, &opts).unwrap();
                let lazy = solve_lazy_cycles(&p, &opts).unwrap();
                assert!((oracle.objective - closure.objective).abs() < 1e-9, "seed {seed} dag {dag}: closure");
                assert!((oracle.objective - lazy.objective).abs() < 1e-9, "seed {seed} dag {dag}: lazy");
                for s in [&closure, &lazy] {
                    let v = objective_value(&p, &s.chosen_nodes, &s.chosen_edges).unwrap();
                    assert!((v - s.objective).abs() < 1e-12);
                    assert_eq!(s.certificate, Certificate::Optimal);
                }
            }
        }
    }

    #[test]
    fn positive_element_never_lowers_optimum() {
        let opts = SolverOptions::default();
        for seed in 0..60 {
            let p = random_problem(seed, 5, 8, true);
            let base = solve_lazy_cycles(&p, &opts).unwrap().objective;
            let mut bigger = p.clone();
            let ids = p.node_ids();
            let h = ids[0];
            let t = NodeId(ids.last().unwrap().0 + 1);
            bigger.node_weights.insert(t, 0.3);
            bigger.edge_weights.insert((h, t), 0.1);
            bigger.couplings.push(Coupling::for_edge((h, t)));
            let after = solve_lazy_cycles(&bigger, &opts).unwrap().objective;
            assert!(after >= base - 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn solvers_are_deterministic() {
        let opts = SolverOptions::default();
        let p = random_problem(7, 7, 12, true);
        assert_eq!(solve_lazy_cycles(&p, &opts).unwrap(), solve_lazy_cycles(&p, &opts).unwrap());
        assert_eq!(
            solve_transitive_closure(&p, &opts).unwrap(),
            solve_transitive_closure(&p, &opts).unwrap()
        );
    }
}
