//! Graph edit distance with unit costs.
//!
//! Nodes may only be matched to nodes with the same (case-insensitive,
//! trimmed) content; a matched pair with different types costs one relabel.
//! Edges follow the node matching: a predicted edge whose endpoints map onto
//! a gold edge costs a relabel if the types differ, otherwise nothing;
//! everything left over is deleted or inserted at cost 1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};

pub const EXACT_GED_MAX_NODES: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GedMode {
    #[default]
    Exact,
    /// Greedy node matching; an upper bound on the exact distance.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("exact edit distance supports at most {limit} nodes per graph, got {nodes}")]
pub struct GedSizeError {
    pub nodes: usize,
    pub limit: usize,
}

struct Prepared<'a> {
    pred: &'a Graph,
    gold: &'a Graph,
    pred_keys: Vec<String>,
    gold_keys: Vec<String>,
    gold_edges: HashMap<(usize, usize), &'a str>,
}

impl<'a> Prepared<'a> {
    fn new(pred: &'a Graph, gold: &'a Graph) -> Self {
        let key = |c: &str| c.trim().to_lowercase();
        let gold_index: HashMap<NodeId, usize> = gold.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let gold_edges = gold
            .edges
            .iter()
            .map(|e| ((gold_index[&e.head], gold_index[&e.tail]), e.edge_type.as_str()))
            .collect();
        Self {
            pred,
            gold,
            pred_keys: pred.nodes.iter().map(|n| key(&n.content)).collect(),
            gold_keys: gold.nodes.iter().map(|n| key(&n.content)).collect(),
            gold_edges,
        }
    }

    /// Total cost of a node mapping (`map[i]` = gold index for pred node i).
    fn cost(&self, map: &[Option<usize>]) -> usize {
        let mut cost = 0;
        let mut gold_used = vec![false; self.gold.nodes.len()];
        for (i, m) in map.iter().enumerate() {
            match m {
                Some(j) => {
                    gold_used[*j] = true;
                    if self.pred.nodes[i].node_type != self.gold.nodes[*j].node_type {
                        cost += 1;
                    }
                }
                None => cost += 1,
            }
        }
        cost += gold_used.iter().filter(|u| !**u).count();

        let pred_index: HashMap<NodeId, usize> = self.pred.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut matched_gold = 0;
        for e in &self.pred.edges {
            let mapped = (map[pred_index[&e.head]], map[pred_index[&e.tail]]);
            match mapped {
                (Some(h), Some(t)) if self.gold_edges.contains_key(&(h, t)) => {
                    matched_gold += 1;
                    if self.gold_edges[&(h, t)] != e.edge_type {
                        cost += 1;
                    }
                }
                _ => cost += 1,
            }
        }
        cost + self.gold.edges.len() - matched_gold
    }

    fn exact(&self) -> usize {
        let mut map = vec![None; self.pred.nodes.len()];
        let mut used = vec![false; self.gold.nodes.len()];
        let mut best = usize::MAX;
        self.search(0, &mut map, &mut used, &mut best);
        best
    }

    fn search(&self, i: usize, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, best: &mut usize) {
        if i == map.len() {
            *best = (*best).min(self.cost(map));
            return;
        }
        for j in 0..self.gold.nodes.len() {
            if !used[j] && self.gold_keys[j] == self.pred_keys[i] {
                used[j] = true;
                map[i] = Some(j);
                self.search(i + 1, map, used, best);
                map[i] = None;
                used[j] = false;
            }
        }
        self.search(i + 1, map, used, best);
    }

    fn greedy(&self) -> usize {
        let mut used = vec![false; self.gold.nodes.len()];
        let mut map = Vec::with_capacity(self.pred.nodes.len());
        for (i, n) in self.pred.nodes.iter().enumerate() {
            let candidates = || (0..self.gold.nodes.len()).filter(|&j| !used[j] && self.gold_keys[j] == self.pred_keys[i]);
            let pick = candidates()
                .find(|&j| self.gold.nodes[j].node_type == n.node_type)
                .or_else(|| candidates().next());
            if let Some(j) = pick {
                used[j] = true;
            }
            map.push(pick);
        }
        self.cost(&map)
    }
}

/// Unnormalized edit count.
pub fn edit_count(pred: &Graph, gold: &Graph, mode: GedMode) -> Result<usize, GedSizeError> {
    let prepared = Prepared::new(pred, gold);
    match mode {
        GedMode::Exact => {
            let nodes = pred.nodes.len().max(gold.nodes.len());
            if nodes > EXACT_GED_MAX_NODES {
                return Err(GedSizeError { nodes, limit: EXACT_GED_MAX_NODES });
            }
            Ok(prepared.exact())
        }
        GedMode::Greedy => Ok(prepared.greedy()),
    }
}

/// Edit count divided by the cost of deleting all of `pred` plus building
/// all of `gold`, so that 0 is identity and 1 is "nothing reusable".
pub fn graph_edit_distance(pred: &Graph, gold: &Graph, mode: GedMode) -> Result<f64, GedSizeError> {
    let raw = edit_count(pred, gold, mode)?;
    let denom = pred.nodes.len() + pred.edges.len() + gold.nodes.len() + gold.edges.len();
    Ok(if denom == 0 { 0.0 } else { raw as f64 / denom as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(contents: &[&str], edges: &[(u32, u32)]) -> Graph {
        let mut g = Graph::new();
        for c in contents {
            g.add_node(*c, "concept");
        }
        for &(h, t) in edges {
            g.add_edge(NodeId(h), NodeId(t), "r");
        }
        g
    }

    #[test]
    fn identity_is_zero() {
        let g = chain(&["a", "b", "c", "d"], &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(graph_edit_distance(&g, &g, GedMode::Exact).unwrap(), 0.0);
        assert_eq!(graph_edit_distance(&g, &g, GedMode::Greedy).unwrap(), 0.0);
    }

    #[test]
    fn missing_edge() {
        let gold = chain(&["a", "b", "c", "d"], &[(0, 1), (1, 2), (2, 3)]);
        let pred = chain(&["a", "b", "c", "d"], &[(0, 1), (1, 2)]);
        assert_eq!(edit_count(&pred, &gold, GedMode::Exact).unwrap(), 1);
        let d = graph_edit_distance(&pred, &gold, GedMode::Exact).unwrap();
        assert!((d - 1.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_one() {
        let gold = chain(&["a", "b"], &[(0, 1)]);
        let pred = chain(&["x", "y", "z"], &[(0, 1), (1, 2)]);
        assert_eq!(graph_edit_distance(&pred, &gold, GedMode::Exact).unwrap(), 1.0);
    }

    #[test]
    fn relabels() {
        let gold = chain(&["a", "b"], &[(0, 1)]);
        let mut pred = gold.clone();
        pred.nodes[0].node_type = "other".into();
        pred.edges[0].edge_type = "other".into();
        assert_eq!(edit_count(&pred, &gold, GedMode::Exact).unwrap(), 2);
    }

    #[test]
    fn exact_size_guard() {
        let names: Vec<String> = (0..9).map(|i| format!("n{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let g = chain(&refs, &[]);
        assert!(edit_count(&g, &g, GedMode::Exact).is_err());
        assert_eq!(edit_count(&g, &g, GedMode::Greedy).unwrap(), 0);
    }

    #[test]
    fn greedy_can_overestimate() {
        // Two "a" nodes: greedy maps pred 0 -> gold 0, but the edge needs the
        // swapped mapping.
        let gold = chain(&["a", "a", "b"], &[(1, 2)]);
        let pred = chain(&["a", "a", "b"], &[(0, 2)]);
        let exact = edit_count(&pred, &gold, GedMode::Exact).unwrap();
        let greedy = edit_count(&pred, &gold, GedMode::Greedy).unwrap();
        assert_eq!(exact, 0);
        assert_eq!(greedy, 2);
    }
}
