use std::collections::BTreeMap;
use std::time::Instant;

use super::bnb::{branch_and_bound, Budget, Model, Row, Verdict};
use super::{edges_acyclic, finish, Certificate, EdgePair, Selection, SolverError, SolverOptions};
use crate::graph::NodeId;

/// Largest node count for which the O(n^3) transitivity rows are built.
pub const CLOSURE_MAX_NODES: usize = 60;

/// Variable layout shared with the LP-format writer.
pub(crate) struct ClosureLayout {
    pub edges: Vec<EdgePair>,
    pub nodes: Vec<NodeId>,
    /// Path indicator per ordered pair of distinct nodes in edge scope.
    pub paths: BTreeMap<EdgePair, usize>,
    pub model: Model,
}

pub(crate) fn build(problem: &super::WeightedSelectionProblem) -> Result<ClosureLayout, SolverError> {
    problem.validate()?;
    let scope: Vec<NodeId> = {
        let mut s: Vec<NodeId> = problem.edge_weights.keys().flat_map(|&(h, t)| [h, t]).collect();
        s.sort();
        s.dedup();
        s
    };
    if problem.require_dag && scope.len() > CLOSURE_MAX_NODES {
        return Err(SolverError::Size { engine: "transitive-closure", size: scope.len(), limit: CLOSURE_MAX_NODES });
    }

    let mut model = Model::default();
    let edges: Vec<EdgePair> = problem.edge_weights.keys().copied().collect();
    let edge_var: BTreeMap<EdgePair, usize> =
        edges.iter().map(|e| (*e, model.add_var(problem.edge_weights[e]))).collect();
    let nodes: Vec<NodeId> = problem.node_weights.keys().copied().collect();
    let node_var: BTreeMap<NodeId, usize> =
        nodes.iter().map(|n| (*n, model.add_var(problem.node_weights[n]))).collect();
    model.seal_primary();

    for c in &problem.couplings {
        model.rows.push(Row::ge(
            vec![(node_var[&c.head], 1.0), (node_var[&c.tail], 1.0), (edge_var[&c.edge], -2.0)],
            0.0,
        ));
    }

    let mut paths = BTreeMap::new();
    if problem.require_dag {
        for &a in &scope {
            for &b in &scope {
                if a != b {
                    paths.insert((a, b), model.add_var(0.0));
                }
            }
        }
        for e in &edges {
            match paths.get(e) {
                Some(&b) => model.rows.push(Row::le(vec![(edge_var[e], 1.0), (b, -1.0)], 0.0)),
                // self-loop: its path indicator is the constant b_nn = 0
                None => model.rows.push(Row::le(vec![(edge_var[e], 1.0)], 0.0)),
            }
        }
        for &n1 in &scope {
            for &n2 in &scope {
                if n2 == n1 {
                    continue;
                }
                for &n3 in &scope {
                    if n3 == n2 {
                        continue;
                    }
                    let b12 = paths[&(n1, n2)];
                    let b23 = paths[&(n2, n3)];
                    if n1 == n3 {
                        // b_11 = 0 >= b_12 + b_21 - 1
                        if n1 < n2 {
                            model.rows.push(Row::le(vec![(b12, 1.0), (b23, 1.0)], 1.0));
                        }
                    } else {
                        let b13 = paths[&(n1, n3)];
                        model.rows.push(Row::ge(vec![(b13, 1.0), (b12, -1.0), (b23, -1.0)], -1.0));
                    }
                }
            }
        }
    }
    Ok(ClosureLayout { edges, nodes, paths, model })
}

/// Exact solve with path-indicator variables for acyclicity.
pub fn solve_transitive_closure(
    problem: &super::WeightedSelectionProblem,
    options: &SolverOptions,
) -> Result<Selection, SolverError> {
    let layout = build(problem)?;
    let budget = Budget { deadline: options.time_limit.map(|d| Instant::now() + d), node_limit: options.node_limit };
    let n_edges = layout.edges.len();
    let edges = &layout.edges;
    let require_dag = problem.require_dag;
    let outcome = branch_and_bound(&layout.model, &budget, |primary| {
        let chosen: Vec<EdgePair> = (0..n_edges).filter(|&i| primary[i]).map(|i| edges[i]).collect();
        if !require_dag || edges_acyclic(&chosen) {
            Verdict::Accept
        } else {
            Verdict::BranchAuxiliary
        }
    })?;
    let chosen_edges = (0..n_edges).filter(|&i| outcome.values[i]).map(|i| layout.edges[i]).collect();
    let chosen_nodes =
        layout.nodes.iter().enumerate().filter(|(i, _)| outcome.values[n_edges + i]).map(|(_, n)| *n).collect();
    let certificate = if outcome.complete { Certificate::Optimal } else { Certificate::Heuristic };
    let sel = finish(problem, chosen_nodes, chosen_edges, certificate, outcome.stats)?;
    if outcome.complete {
        Ok(sel)
    } else {
        Err(SolverError::Timeout { best: Box::new(sel) })
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn two_cycle_keeps_heavier_edge() {
        let p = edges_only(&[((0, 1), -0.4), ((1, 0), -0.3)], true);
        let s = solve_transitive_closure(&p, &SolverOptions::default()).unwrap();
        assert!((s.objective + 0.4).abs() < 1e-12);
        assert_eq!(s.chosen_edges.into_iter().collect::<Vec<_>>(), vec![(NodeId(0), NodeId(1))]);
    }

    #[test]
    fn acyclic_negative_selects_everything() {
        let p = coupled(&[(0, -0.1), (1, -0.2), (2, -0.3)], &[((0, 1), -0.5), ((1, 2), -0.5), ((0, 2), -0.5)], true);
        let s = solve_transitive_closure(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.chosen_nodes.len(), 3);
        assert_eq!(s.chosen_edges.len(), 3);
        assert!((s.objective + 2.1).abs() < 1e-12);
    }

    #[test]
    fn all_positive_is_empty() {
        let p = coupled(&[(0, 0.1), (1, 0.2)], &[((0, 1), 0.5)], true);
        let s = solve_transitive_closure(&p, &SolverOptions::default()).unwrap();
        assert!(s.chosen_nodes.is_empty() && s.chosen_edges.is_empty());
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn self_loop_is_never_chosen_under_dag() {
        let p = edges_only(&[((3, 3), -1.0)], true);
        let s = solve_transitive_closure(&p, &SolverOptions::default()).unwrap();
        assert!(s.chosen_edges.is_empty());
    }

    #[test]
    fn size_guard() {
        let edges: Vec<((u32, u32), f64)> = (0..61).map(|i| ((i, i + 1), -0.1)).collect();
        let p = edges_only(&edges, true);
        assert!(matches!(
            solve_transitive_closure(&p, &SolverOptions::default()),
            Err(SolverError::Size { .. })
        ));
    }
}
