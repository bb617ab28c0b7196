//! Typed directed graphs: the unit of input samples, hypotheses and outputs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Half-open token interval `[start, end)` over a shared source document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlap(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub content: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub head: NodeId,
    pub tail: NodeId,
    #[serde(rename = "type")]
    pub edge_type: String,
}

/// Nodes and edges in insertion order, plus free-form metadata.
///
/// Field order here is the on-disk field order of the JSON format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge ({0}, {1}) references a missing node")]
    DanglingEdge(NodeId, NodeId),
    #[error("more than one edge from {0} to {1}")]
    ParallelEdge(NodeId, NodeId),
    #[error("node {0} has empty content")]
    EmptyContent(NodeId),
}

/// Content-level identity of an edge: `(head content, tail content, edge type)`.
pub type EdgeKey = (String, String, String);

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn next_id(&self) -> NodeId {
        NodeId(self.nodes.iter().map(|n| n.id.0 + 1).max().unwrap_or(0))
    }

    /// Appends a node with a fresh id.
    pub fn add_node(&mut self, content: impl Into<String>, node_type: impl Into<String>) -> NodeId {
        let id = self.next_id();
        self.nodes.push(Node { id, content: content.into(), node_type: node_type.into(), span: None });
        id
    }

    pub fn add_edge(&mut self, head: NodeId, tail: NodeId, edge_type: impl Into<String>) {
        self.edges.push(Edge { head, tail, edge_type: edge_type.into() });
    }

    pub fn has_edge(&self, head: NodeId, tail: NodeId) -> bool {
        self.edges.iter().any(|e| e.head == head && e.tail == tail)
    }

    /// Checks the structural invariants: unique ids, non-empty content,
    /// endpoints present, at most one edge per ordered pair.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = HashMap::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if seen.insert(node.id, ()).is_some() {
                return Err(GraphError::DuplicateNode(node.id));
            }
            if node.content.trim().is_empty() {
                return Err(GraphError::EmptyContent(node.id));
            }
        }
        let mut pairs = HashMap::with_capacity(self.edges.len());
        for edge in &self.edges {
            if !seen.contains_key(&edge.head) || !seen.contains_key(&edge.tail) {
                return Err(GraphError::DanglingEdge(edge.head, edge.tail));
            }
            if pairs.insert((edge.head, edge.tail), ()).is_some() {
                return Err(GraphError::ParallelEdge(edge.head, edge.tail));
            }
        }
        Ok(())
    }

    pub fn is_dag(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// Kahn's algorithm; among ready nodes the smallest id goes first.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let mut indegree: BTreeMap<NodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut succ: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for edge in &self.edges {
            *indegree.entry(edge.tail).or_insert(0) += 1;
            indegree.entry(edge.head).or_insert(0);
            succ.entry(edge.head).or_default().push(edge.tail);
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| Reverse(id)).collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for &next in succ.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(&next).expect("indegree entry");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(next));
                }
            }
        }
        if order.len() == indegree.len() {
            Ok(order)
        } else {
            Err(GraphError::Cycle)
        }
    }

    /// Edges keyed by endpoint content rather than id, so graphs built from
    /// different pools can be compared.
    pub fn edge_keys(&self) -> Vec<EdgeKey> {
        let content: HashMap<NodeId, &str> =
            self.nodes.iter().map(|n| (n.id, n.content.as_str())).collect();
        self.edges
            .iter()
            .map(|e| {
                let head = content.get(&e.head).copied().unwrap_or_default().to_string();
                let tail = content.get(&e.tail).copied().unwrap_or_default().to_string();
                (head, tail, e.edge_type.clone())
            })
            .collect()
    }

    /// Sorted `(content, type)` pairs of all nodes.
    pub fn node_keys(&self) -> Vec<(String, String)> {
        let mut keys: Vec<_> =
            self.nodes.iter().map(|n| (n.content.clone(), n.node_type.clone())).collect();
        keys.sort();
        keys
    }

    /// Equality up to node ids and metadata.
    pub fn same_structure(&self, other: &Graph) -> bool {
        let mut a = self.edge_keys();
        let mut b = other.edge_keys();
        a.sort();
        b.sort();
        a == b && self.node_keys() == other.node_keys()
    }

    /// Weakly connected; the empty graph counts as not connected.
    pub fn is_weakly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let index: HashMap<NodeId, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            if let (Some(&a), Some(&b)) = (index.get(&e.head), index.get(&e.tail)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        let root = find(&mut parent, 0);
        (1..self.nodes.len()).all(|i| find(&mut parent, i) == root)
    }
}

/// Precision, recall and F1 of `pred`'s edges against `gold`'s, matched by
/// [`EdgeKey`] with multiset semantics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScore {
    /// Scores from true-positive, predicted and gold counts. Empty-vs-empty is perfect;
    /// an empty side otherwise yields zero for the undefined ratio.
    pub fn from_counts(tp: usize, n_pred: usize, n_gold: usize) -> Self {
        if n_pred == 0 && n_gold == 0 {
            return Self { precision: 1.0, recall: 1.0, f1: 1.0 };
        }
        let precision = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
        let recall = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (n_pred + n_gold) as f64 };
        Self { precision, recall, f1 }
    }
}

pub fn edge_multiset_prf(pred: &Graph, gold: &Graph) -> PrfScore {
    let pred_keys = pred.edge_keys();
    let gold_keys = gold.edge_keys();
    let mut gold_counts: HashMap<&EdgeKey, usize> = HashMap::new();
    for k in &gold_keys {
        *gold_counts.entry(k).or_insert(0) += 1;
    }
    let mut tp = 0;
    for k in &pred_keys {
        if let Some(c) = gold_counts.get_mut(k) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    PrfScore::from_counts(tp, pred_keys.len(), gold_keys.len())
}

pub fn edge_multiset_f1(pred: &Graph, gold: &Graph) -> f64 {
    edge_multiset_prf(pred, gold).f1
}
