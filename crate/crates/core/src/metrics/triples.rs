use std::collections::BTreeSet;

use crate::graph::{Graph, PrfScore};

pub type Triple = (String, String, String);

/// `(subject, property, object)` triples, lowercased and trimmed.
pub fn triples(g: &Graph) -> BTreeSet<Triple> {
    let norm = |s: &str| s.trim().to_lowercase();
    let content = |id| g.node(id).map(|n| norm(&n.content)).unwrap_or_default();
    g.edges.iter().map(|e| (content(e.head), norm(&e.edge_type), content(e.tail))).collect()
}

/// Per-instance triple F1 and whether the graphs match exactly (1 iff the
/// triple sets are equal).
pub fn triple_f1(pred: &Graph, gold: &Graph) -> (f64, u8) {
    let p = triples(pred);
    let g = triples(gold);
    let tp = p.intersection(&g).count();
    let f1 = PrfScore::from_counts(tp, p.len(), g.len()).f1;
    (f1, u8::from(p == g))
}
