use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can", "do", "does", "for", "from", "has",
    "have", "he", "her", "his", "i", "if", "in", "is", "it", "its", "not", "of", "on", "or", "she", "should", "so",
    "that", "the", "their", "them", "there", "they", "this", "to", "was", "we", "were", "will", "with", "would",
    "you",
];

fn content_words(text: &str) -> BTreeSet<String> {
    crate::canonical::tokens(text).into_iter().filter(|t| !STOPWORDS.contains(&t.as_str())).collect()
}

/// 1 when `pred` is a connected DAG with at least two nodes sharing a
/// non-stopword token with `belief` and at least two sharing one with
/// `argument`; 0 otherwise.
pub fn structural_accuracy(pred: &Graph, belief: &str, argument: &str) -> u8 {
    if !pred.is_dag() || !pred.is_weakly_connected() {
        return 0;
    }
    let belief = content_words(belief);
    let argument = content_words(argument);
    let mut from_belief = 0;
    let mut from_argument = 0;
    for n in &pred.nodes {
        let words = content_words(&n.content);
        if !words.is_disjoint(&belief) {
            from_belief += 1;
        }
        if !words.is_disjoint(&argument) {
            from_argument += 1;
        }
    }
    u8::from(from_belief >= 2 && from_argument >= 2)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub spurious_edges: usize,
    pub omitted_edges: usize,
    pub reversed_edges: usize,
}

impl ErrorCounts {
    pub fn add(&mut self, other: &ErrorCounts) {
        self.spurious_edges += other.spurious_edges;
        self.omitted_edges += other.omitted_edges;
        self.reversed_edges += other.reversed_edges;
    }
}

fn endpoint_pairs(g: &Graph) -> BTreeSet<(String, String)> {
    let key = |id| g.node(id).map(|n| n.content.trim().to_lowercase()).unwrap_or_default();
    g.edges.iter().map(|e| (key(e.head), key(e.tail))).collect()
}

/// Edge errors by endpoint content, ignoring edge types. A predicted edge
/// whose reverse is in the gold graph (and which is not itself gold) is
/// reversed; it counts as one false positive and one false negative.
pub fn edge_errors(pred: &Graph, gold: &Graph) -> ErrorCounts {
    let p = endpoint_pairs(pred);
    let g = endpoint_pairs(gold);
    let mut counts = ErrorCounts::default();
    for (h, t) in &p {
        if g.contains(&(h.clone(), t.clone())) {
            continue;
        }
        if g.contains(&(t.clone(), h.clone())) {
            counts.reversed_edges += 1;
        } else {
            counts.spurious_edges += 1;
        }
    }
    for (h, t) in &g {
        if !p.contains(&(h.clone(), t.clone())) && !p.contains(&(t.clone(), h.clone())) {
            counts.omitted_edges += 1;
        }
    }
    counts
}
