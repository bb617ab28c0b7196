//! Span-based scores for argument-mining style graphs: component F1 through
//! BIO tagging, and relation F1 at exact or partial span overlap.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId, PrfScore, Span};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("node {0} has no span")]
    Missing(NodeId),
    #[error("spans of nodes {0} and {1} overlap")]
    Overlap(NodeId, NodeId),
    #[error("span of node {node} ends at {end}, past the document length {len}")]
    OutOfRange { node: NodeId, end: usize, len: usize },
    #[error("invalid BIO sequence at token {0}: {1}")]
    InvalidBio(usize, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BioLabel {
    B(String),
    I(String),
    O,
}

/// Typed span with its start/end token indices (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Tags `len` tokens from the spans of `g`'s nodes.
pub fn bio_encode(g: &Graph, len: usize) -> Result<Vec<BioLabel>, SpanError> {
    let mut labels = vec![BioLabel::O; len];
    let mut owner: Vec<Option<NodeId>> = vec![None; len];
    for n in &g.nodes {
        let span = n.span.ok_or(SpanError::Missing(n.id))?;
        if span.end > len {
            return Err(SpanError::OutOfRange { node: n.id, end: span.end, len });
        }
        for i in span.start..span.end {
            if let Some(other) = owner[i] {
                return Err(SpanError::Overlap(other, n.id));
            }
            owner[i] = Some(n.id);
            labels[i] = if i == span.start { BioLabel::B(n.node_type.clone()) } else { BioLabel::I(n.node_type.clone()) };
        }
    }
    Ok(labels)
}

/// Recovers typed spans from a BIO sequence.
pub fn bio_decode(labels: &[BioLabel]) -> Result<Vec<LabeledSpan>, SpanError> {
    let mut out: Vec<LabeledSpan> = Vec::new();
    let mut open: Option<LabeledSpan> = None;
    for (i, l) in labels.iter().enumerate() {
        match l {
            BioLabel::O => out.extend(open.take()),
            BioLabel::B(t) => {
                out.extend(open.take());
                open = Some(LabeledSpan { start: i, end: i + 1, label: t.clone() });
            }
            BioLabel::I(t) => match open.as_mut() {
                Some(s) if s.label == *t => s.end = i + 1,
                _ => return Err(SpanError::InvalidBio(i, format!("I-{t} does not continue a {t} span"))),
            },
        }
    }
    out.extend(open);
    Ok(out)
}

fn doc_len(pred: &Graph, gold: &Graph) -> usize {
    pred.nodes.iter().chain(&gold.nodes).filter_map(|n| n.span).map(|s| s.end).max().unwrap_or(0)
}

/// Component precision/recall/F1 over typed spans. With no predicted spans,
/// precision is 0 by convention.
pub fn component_f1(pred: &Graph, gold: &Graph) -> Result<PrfScore, SpanError> {
    let len = doc_len(pred, gold);
    let p: BTreeSet<LabeledSpan> = bio_decode(&bio_encode(pred, len)?)?.into_iter().collect();
    let g: BTreeSet<LabeledSpan> = bio_decode(&bio_encode(gold, len)?)?.into_iter().collect();
    let tp = p.intersection(&g).count();
    if p.is_empty() {
        return Ok(PrfScore { precision: 0.0, recall: 0.0, f1: 0.0 });
    }
    Ok(PrfScore::from_counts(tp, p.len(), g.len()))
}

/// Fills in spans for nodes that lack one by locating their content's tokens
/// in `doc`. Each occurrence is used at most once; nodes whose content cannot
/// be found keep `None`.
pub fn locate_spans(g: &mut Graph, doc: &[String]) {
    let norm = |s: &str| s.to_lowercase();
    let doc: Vec<String> = doc.iter().map(|t| norm(t)).collect();
    let mut used = vec![false; doc.len()];
    for n in &g.nodes {
        if let Some(s) = n.span {
            used.iter_mut().take(s.end.min(doc.len())).skip(s.start).for_each(|u| *u = true);
        }
    }
    for n in g.nodes.iter_mut().filter(|n| n.span.is_none()) {
        let needle: Vec<String> = n.content.split_whitespace().map(norm).collect();
        if needle.is_empty() || needle.len() > doc.len() {
            continue;
        }
        let hit = (0..=doc.len() - needle.len())
            .find(|&i| doc[i..i + needle.len()] == needle[..] && !used[i..i + needle.len()].iter().any(|&u| u));
        if let Some(i) = hit {
            used[i..i + needle.len()].iter_mut().for_each(|u| *u = true);
            n.span = Some(Span::new(i, i + needle.len()));
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapDenominator {
    /// Overlap divided by the gold span length.
    #[default]
    Gold,
    /// Overlap divided by the predicted span length.
    Pred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialMatchOptions {
    pub min_ratio_percent: u32,
    pub require_type: bool,
    pub denominator: OverlapDenominator,
}

impl Default for PartialMatchOptions {
    fn default() -> Self {
        Self { min_ratio_percent: 50, require_type: true, denominator: OverlapDenominator::Gold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Exact,
    Partial(PartialMatchOptions),
}

impl Overlap {
    pub fn half() -> Self {
        Overlap::Partial(PartialMatchOptions::default())
    }
}

struct SpanEdge {
    head: Span,
    tail: Span,
    label: String,
}

fn span_edges(g: &Graph) -> Vec<Option<SpanEdge>> {
    g.edges
        .iter()
        .map(|e| {
            let head = g.node(e.head)?.span?;
            let tail = g.node(e.tail)?.span?;
            Some(SpanEdge { head, tail, label: e.edge_type.clone() })
        })
        .collect()
}

fn ratio(pred: &Span, gold: &Span, denom: OverlapDenominator) -> f64 {
    let d = match denom {
        OverlapDenominator::Gold => gold.len(),
        OverlapDenominator::Pred => pred.len(),
    };
    if d == 0 {
        return 0.0;
    }
    pred.overlap(gold) as f64 / d as f64
}

/// One-to-one matching of predicted to gold edges. Returns the matched
/// `(pred index, gold index)` pairs.
pub fn match_relations(pred: &Graph, gold: &Graph, overlap: Overlap) -> Vec<(usize, usize)> {
    let p = span_edges(pred);
    let g = span_edges(gold);
    // (score, is_exact, pred, gold)
    let mut candidates: Vec<(f64, bool, usize, usize)> = Vec::new();
    for (i, pe) in p.iter().enumerate() {
        let Some(pe) = pe else { continue };
        for (j, ge) in g.iter().enumerate() {
            let Some(ge) = ge else { continue };
            let exact = pe.head == ge.head && pe.tail == ge.tail && pe.label == ge.label;
            match overlap {
                Overlap::Exact => {
                    if exact {
                        candidates.push((2.0, true, i, j));
                    }
                }
                Overlap::Partial(opts) => {
                    if opts.require_type && pe.label != ge.label {
                        continue;
                    }
                    let rh = ratio(&pe.head, &ge.head, opts.denominator);
                    let rt = ratio(&pe.tail, &ge.tail, opts.denominator);
                    let min = opts.min_ratio_percent as f64 / 100.0;
                    if exact || (rh >= min - 1e-12 && rt >= min - 1e-12) {
                        candidates.push((rh + rt, exact, i, j));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.1.cmp(&a.1).then(b.0.total_cmp(&a.0)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
    });
    let mut used_p = vec![false; p.len()];
    let mut used_g = vec![false; g.len()];
    let mut out = Vec::new();
    for (_, _, i, j) in candidates {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

pub fn relation_f1(pred: &Graph, gold: &Graph, overlap: Overlap) -> PrfScore {
    let tp = match_relations(pred, gold, overlap).len();
    PrfScore::from_counts(tp, pred.edges.len(), gold.edges.len())
}
