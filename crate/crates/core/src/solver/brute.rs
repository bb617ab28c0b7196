use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{
    edges_acyclic, objective_value, Certificate, EdgePair, Selection, SolveStats, SolverError,
    WeightedSelectionProblem, WEIGHT_EPS,
};
use crate::graph::NodeId;

pub const BRUTE_FORCE_MAX_ELEMENTS: usize = 20;

/// Global optimum by enumeration. Among selections within 1e-9 of the optimum
/// the one whose sorted element list is lexicographically smallest wins, with
/// nodes (ascending id) indexed before edges (ascending pair).
pub fn brute_force(problem: &WeightedSelectionProblem) -> Result<Selection, SolverError> {
    problem.validate()?;
    let size = problem.element_count();
    if size > BRUTE_FORCE_MAX_ELEMENTS {
        return Err(SolverError::Size { engine: "brute-force", size, limit: BRUTE_FORCE_MAX_ELEMENTS });
    }
    let nodes: Vec<NodeId> = problem.node_weights.keys().copied().collect();
    let edges: Vec<EdgePair> = problem.edge_weights.keys().copied().collect();
    let (n, m) = (nodes.len(), edges.len());
    let node_index = |id: NodeId| nodes.binary_search(&id).expect("validated coupling node");

    // Per edge: node mask that must be chosen alongside it.
    let mut edge_requires = vec![0u32; m];
    for c in &problem.couplings {
        let e = edges.binary_search(&c.edge).expect("validated coupling edge");
        edge_requires[e] |= (1 << node_index(c.head)) | (1 << node_index(c.tail));
    }

    let edge_masks = 1usize << m;
    let mut required = vec![0u32; edge_masks];
    let mut edge_sum = vec![0.0f64; edge_masks];
    for mask in 1..edge_masks {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        required[mask] = required[rest] | edge_requires[low];
        edge_sum[mask] = edge_sum[rest] + problem.edge_weights[&edges[low]];
    }
    let node_masks = 1usize << n;
    let mut node_sum = vec![0.0f64; node_masks];
    for mask in 1..node_masks {
        let low = mask.trailing_zeros() as usize;
        node_sum[mask] = node_sum[mask & (mask - 1)] + problem.node_weights[&nodes[low]];
    }

    let full = (node_masks - 1) as u32;
    let mut best: Option<(f64, u32, usize)> = None;
    for emask in 0..edge_masks {
        if problem.require_dag && emask != 0 {
            let chosen: Vec<EdgePair> = (0..m).filter(|&i| emask >> i & 1 == 1).map(|i| edges[i]).collect();
            if !edges_acyclic(&chosen) {
                continue;
            }
        }
        let req = required[emask];
        let free = full & !req;
        // Enumerate every superset of `req` via the submasks of `free`.
        let mut sub = free;
        loop {
            let nmask = req | sub;
            let obj = node_sum[nmask as usize] + edge_sum[emask];
            let better = match best {
                None => true,
                Some((b, bn, be)) => {
                    obj < b - WEIGHT_EPS
                        || (obj <= b + WEIGHT_EPS && compare_canonical((nmask, emask), (bn, be), n, m) == Ordering::Less)
                }
            };
            if better {
                best = Some((obj, nmask, emask));
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }
    let (_, nmask, emask) = best.expect("the empty selection is always feasible");
    let chosen_nodes: BTreeSet<NodeId> = (0..n).filter(|&i| nmask >> i & 1 == 1).map(|i| nodes[i]).collect();
    let chosen_edges: BTreeSet<EdgePair> = (0..m).filter(|&i| emask >> i & 1 == 1).map(|i| edges[i]).collect();
    let objective = objective_value(problem, &chosen_nodes, &chosen_edges)?;
    Ok(Selection { chosen_nodes, chosen_edges, objective, certificate: Certificate::Optimal, stats: SolveStats::default() })
}

fn compare_canonical(a: (u32, usize), b: (u32, usize), n: usize, m: usize) -> Ordering {
    let list = |(nm, em): (u32, usize)| -> Vec<usize> {
        (0..n).filter(|&i| nm >> i & 1 == 1).chain((0..m).filter(|&i| em >> i & 1 == 1).map(|i| n + i)).collect()
    };
    list(a).cmp(&list(b))
}
