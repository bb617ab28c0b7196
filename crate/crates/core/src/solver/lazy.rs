use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use super::bnb::{branch_and_bound, Budget, Model, Row, Verdict};
use super::{
    find_cycle, finish, Certificate, EdgePair, Selection, SolveStats, SolverError, SolverOptions,
    WeightedSelectionProblem, WEIGHT_EPS,
};
use crate::graph::NodeId;

/// Exact solve that adds a cycle-elimination cut whenever an integral
/// relaxation contains a directed cycle.
pub fn solve_lazy_cycles(
    problem: &WeightedSelectionProblem,
    options: &SolverOptions,
) -> Result<Selection, SolverError> {
    problem.validate()?;
    if !problem.has_negative_weight() {
        return Ok(Selection::empty());
    }
    if let Some(sel) = unconstrained_optimum(problem)? {
        return Ok(sel);
    }

    let mut model = Model::default();
    let edges: Vec<EdgePair> = problem.edge_weights.keys().copied().collect();
    let edge_var: BTreeMap<EdgePair, usize> =
        edges.iter().map(|e| (*e, model.add_var(problem.edge_weights[e]))).collect();
    let nodes: Vec<NodeId> = problem.node_weights.keys().copied().collect();
    let node_var: BTreeMap<NodeId, usize> =
        nodes.iter().map(|n| (*n, model.add_var(problem.node_weights[n]))).collect();
    model.seal_primary();
    // x_e <= y_h and x_e <= y_t: implies y_h + y_t - 2 x_e >= 0 and is tighter
    // in the relaxation.
    for c in &problem.couplings {
        let x = edge_var[&c.edge];
        model.rows.push(Row::le(vec![(x, 1.0), (node_var[&c.head], -1.0)], 0.0));
        if c.tail != c.head {
            model.rows.push(Row::le(vec![(x, 1.0), (node_var[&c.tail], -1.0)], 0.0));
        }
    }
    if problem.require_dag {
        for e in edges.iter().filter(|(h, t)| h == t) {
            model.rows.push(Row::le(vec![(edge_var[e], 1.0)], 0.0));
        }
    }

    let budget = Budget { deadline: options.time_limit.map(|d| Instant::now() + d), node_limit: options.node_limit };
    let outcome = branch_and_bound(&model, &budget, |primary| {
        if !problem.require_dag {
            return Verdict::Accept;
        }
        let chosen: Vec<EdgePair> = edges.iter().enumerate().filter(|(i, _)| primary[*i]).map(|(_, e)| *e).collect();
        match find_cycle(&chosen) {
            None => Verdict::Accept,
            Some(cycle) => {
                let len = cycle.len() as f64;
                Verdict::Cut(vec![Row::le(cycle.iter().map(|e| (edge_var[e], 1.0)).collect(), len - 1.0)])
            }
        }
    })?;

    let n_edges = edges.len();
    let chosen_edges: BTreeSet<EdgePair> =
        edges.iter().enumerate().filter(|(i, _)| outcome.values[*i]).map(|(_, e)| *e).collect();
    let chosen_nodes: BTreeSet<NodeId> =
        nodes.iter().enumerate().filter(|(i, _)| outcome.values[n_edges + i]).map(|(_, n)| *n).collect();
    let certificate = if outcome.complete { Certificate::Optimal } else { Certificate::Heuristic };
    let sel = finish(problem, chosen_nodes, chosen_edges, certificate, outcome.stats)?;
    if outcome.complete {
        Ok(sel)
    } else {
        Err(SolverError::Timeout { best: Box::new(sel) })
    }
}

/// Taking every negative element is optimal when it is already feasible.
fn unconstrained_optimum(problem: &WeightedSelectionProblem) -> Result<Option<Selection>, SolverError> {
    let nodes: BTreeSet<NodeId> =
        problem.node_weights.iter().filter(|(_, &w)| w < -WEIGHT_EPS).map(|(n, _)| *n).collect();
    let edges: BTreeSet<EdgePair> =
        problem.edge_weights.iter().filter(|(_, &w)| w < -WEIGHT_EPS).map(|(e, _)| *e).collect();
    let coupled_ok = problem
        .couplings
        .iter()
        .all(|c| !edges.contains(&c.edge) || (nodes.contains(&c.head) && nodes.contains(&c.tail)));
    let dag_ok = !problem.require_dag || find_cycle(&edges).is_none();
    if coupled_ok && dag_ok {
        finish(problem, nodes, edges, Certificate::Optimal, SolveStats::default()).map(Some)
    } else {
        Ok(None)
    }
}
