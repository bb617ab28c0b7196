//! Node and edge pools built across samples by lexical Jaccard merging.
//!
//! Samples are visited in index order and nodes in declaration order. An
//! incoming node joins the first pooled node holding any content whose token
//! Jaccard similarity reaches the threshold, otherwise it opens a new pooled
//! node. Edges follow their endpoints through that merge map. Occurrence
//! probabilities are `|sample_ids| / T`, with each sample counted at most once
//! per pooled element.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Span};
use crate::sample_io::SampleSet;

pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.5;

/// Lowercased tokens, split on anything that is not alphanumeric.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn jaccard_sets(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn jaccard(a: &str, b: &str) -> f64 {
    jaccard_sets(&tokens(a), &tokens(b))
}

/// Most frequent label; ties go to the label seen first.
pub fn mode(labels: &[String]) -> String {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        counts.entry(l.as_str()).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .map(|(l, _)| l.to_string())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledNode {
    pub id: NodeId,
    pub content_list: Vec<String>,
    pub type_list: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub span_list: Vec<Option<Span>>,
    pub sample_ids: BTreeSet<usize>,
    pub representative_content: String,
    pub representative_type: String,
    #[serde(skip)]
    token_sets: Vec<BTreeSet<String>>,
}

impl PooledNode {
    /// Index into `content_list` of the representative content.
    pub fn representative_index(&self) -> usize {
        self.content_list.iter().position(|c| *c == self.representative_content).unwrap_or(0)
    }

    pub fn representative_span(&self) -> Option<Span> {
        self.span_list.get(self.representative_index()).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEdge {
    pub head: NodeId,
    pub tail: NodeId,
    pub type_list: Vec<String>,
    pub sample_ids: BTreeSet<usize>,
    pub representative_type: String,
}

impl PooledEdge {
    /// Both endpoints merged into the same pooled node.
    pub fn is_degenerate(&self) -> bool {
        self.head == self.tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub nodes: Vec<PooledNode>,
    pub edges: Vec<PooledEdge>,
    pub sample_count: usize,
    pub jaccard_threshold: f64,
    /// Per sample: original node id to pooled node id.
    pub merge_maps: Vec<BTreeMap<NodeId, NodeId>>,
}

/// Representative content and type of a merge history.
///
/// Content is the element with the highest mean Jaccard similarity to the
/// other elements (ties: shorter, then lexicographically smaller); type is
/// the mode of `type_list`.
pub fn elect_representative(content_list: &[String], type_list: &[String]) -> (String, String) {
    let sets: Vec<_> = content_list.iter().map(|c| tokens(c)).collect();
    (elect_content(content_list, &sets), mode(type_list))
}

fn elect_content(contents: &[String], sets: &[BTreeSet<String>]) -> String {
    if contents.len() <= 1 {
        return contents.first().cloned().unwrap_or_default();
    }
    let mut best: Option<(f64, &String)> = None;
    for (i, c) in contents.iter().enumerate() {
        let total: f64 = sets
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| jaccard_sets(&sets[i], s))
            .sum();
        let mean = total / (contents.len() - 1) as f64;
        let better = match best {
            None => true,
            Some((bm, bc)) => {
                mean > bm + 1e-12
                    || ((mean - bm).abs() <= 1e-12 && (c.len(), c.as_str()) < (bc.len(), bc.as_str()))
            }
        };
        if better {
            best = Some((mean, c));
        }
    }
    best.map(|(_, c)| c.clone()).unwrap_or_default()
}

impl Pool {
    pub fn node(&self, id: NodeId) -> &PooledNode {
        &self.nodes[id.index()]
    }

    pub fn node_probability(&self, id: NodeId) -> f64 {
        self.nodes[id.index()].sample_ids.len() as f64 / self.sample_count as f64
    }

    pub fn edge_probability(&self, edge: &PooledEdge) -> f64 {
        edge.sample_ids.len() as f64 / self.sample_count as f64
    }

    /// Probability of an ordered pool pair; unobserved pairs are 0.
    pub fn pair_probability(&self, head: NodeId, tail: NodeId) -> f64 {
        self.edges
            .iter()
            .find(|e| e.head == head && e.tail == tail)
            .map_or(0.0, |e| self.edge_probability(e))
    }
}

/// Builds the pools. `threshold` must lie in `[0, 1]`.
pub fn build_pool(samples: &SampleSet, threshold: f64) -> Pool {
    let mut nodes: Vec<PooledNode> = Vec::new();
    let mut edges: Vec<PooledEdge> = Vec::new();
    let mut edge_index: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    let mut merge_maps = Vec::with_capacity(samples.len());

    for (sample_id, graph) in samples.samples.iter().enumerate() {
        let mut map = BTreeMap::new();
        let mut seen_content: HashMap<&str, NodeId> = HashMap::new();
        for node in &graph.nodes {
            if let Some(&pid) = seen_content.get(node.content.as_str()) {
                map.insert(node.id, pid);
                continue;
            }
            let toks = tokens(&node.content);
            let target = nodes
                .iter()
                .position(|p| p.token_sets.iter().any(|s| jaccard_sets(s, &toks) >= threshold));
            let pid = match target {
                Some(i) => {
                    let p = &mut nodes[i];
                    p.content_list.push(node.content.clone());
                    p.type_list.push(node.node_type.clone());
                    p.span_list.push(node.span);
                    p.token_sets.push(toks);
                    p.sample_ids.insert(sample_id);
                    p.id
                }
                None => {
                    let id = NodeId(nodes.len() as u32);
                    nodes.push(PooledNode {
                        id,
                        content_list: vec![node.content.clone()],
                        type_list: vec![node.node_type.clone()],
                        span_list: vec![node.span],
                        sample_ids: BTreeSet::from([sample_id]),
                        representative_content: String::new(),
                        representative_type: String::new(),
                        token_sets: vec![toks],
                    });
                    id
                }
            };
            seen_content.insert(node.content.as_str(), pid);
            map.insert(node.id, pid);
        }
        for edge in &graph.edges {
            let (Some(&h), Some(&t)) = (map.get(&edge.head), map.get(&edge.tail)) else {
                continue;
            };
            let i = *edge_index.entry((h, t)).or_insert_with(|| {
                edges.push(PooledEdge {
                    head: h,
                    tail: t,
                    type_list: Vec::new(),
                    sample_ids: BTreeSet::new(),
                    representative_type: String::new(),
                });
                edges.len() - 1
            });
            edges[i].type_list.push(edge.edge_type.clone());
            edges[i].sample_ids.insert(sample_id);
        }
        merge_maps.push(map);
    }

    for p in &mut nodes {
        p.representative_content = elect_content(&p.content_list, &p.token_sets);
        p.representative_type = mode(&p.type_list);
        if p.span_list.iter().all(Option::is_none) {
            p.span_list.clear();
        }
    }
    for e in &mut edges {
        e.representative_type = mode(&e.type_list);
    }

    Pool { nodes, edges, sample_count: samples.len(), jaccard_threshold: threshold, merge_maps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn single(content: &str) -> Graph {
        let mut g = Graph::new();
        g.add_node(content, "step");
        g
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard("bake the cake", "bake the cake now"), 0.75);
        assert_eq!(jaccard("Same, text!", "same text"), 1.0);
        assert_eq!(jaccard("alpha", "beta"), 0.0);
        assert_eq!(jaccard("", "  ,, "), 1.0);
        assert_eq!(jaccard("dry dishes", "dry the dishes now"), 0.5);
    }

    #[test]
    fn exact_repeats_pool_to_one_node() {
        let set = SampleSet::new(vec![single("dry the dishes"); 3]);
        let pool = build_pool(&set, 0.5);
        assert_eq!(pool.nodes.len(), 1);
        assert_eq!(pool.nodes[0].sample_ids.len(), 3);
        assert_eq!(pool.node_probability(NodeId(0)), 1.0);
    }

    #[test]
    fn threshold_decides_merge() {
        let set = SampleSet::new(vec![single("dry dishes"), single("dry the dishes now")]);
        assert_eq!(build_pool(&set, 0.5).nodes.len(), 1);
        assert_eq!(build_pool(&set, 0.6).nodes.len(), 2);
    }

    #[test]
    fn representative_content_and_type() {
        let (c, t) = elect_representative(
            &strings(&["a b c", "a b c", "x y"]),
            &strings(&["Premise", "Premise", "Claim"]),
        );
        assert_eq!(c, "a b c");
        assert_eq!(t, "Premise");
        let (c, t) = elect_representative(&strings(&["only one"]), &strings(&["Claim"]));
        assert_eq!((c.as_str(), t.as_str()), ("only one", "Claim"));
    }

    #[test]
    fn representative_ties_prefer_shorter_then_lexicographic() {
        // Same token set, so every pairwise similarity is 1.
        let (c, _) = elect_representative(&strings(&["dry the the dishes", "dry the dishes"]), &strings(&["", ""]));
        assert_eq!(c, "dry the dishes");
        let (c, _) = elect_representative(&strings(&["b a", "a b"]), &strings(&["", ""]));
        assert_eq!(c, "a b");
    }

    #[test]
    fn mode_ties_go_to_first_seen() {
        assert_eq!(mode(&strings(&["Claim", "Premise", "Premise", "Claim"])), "Claim");
        assert_eq!(mode(&strings(&["x", "y", "y"])), "y");
        assert_eq!(mode(&[]), "");
    }

    #[test]
    fn one_sample_counts_once_per_pooled_node() {
        let mut g = Graph::new();
        let a = g.add_node("dry the dishes", "step");
        let b = g.add_node("dry the dishes now", "step");
        let c = g.add_node("put away", "step");
        g.add_edge(a, c, "before");
        g.add_edge(b, c, "before");
        let pool = build_pool(&SampleSet::new(vec![g, single("dry the dishes")]), 0.5);
        assert_eq!(pool.nodes[0].content_list.len(), 3);
        assert_eq!(pool.node_probability(NodeId(0)), 1.0);
        assert_eq!(pool.edges.len(), 1);
        assert_eq!(pool.edges[0].sample_ids.len(), 1);
        assert_eq!(pool.edges[0].type_list.len(), 2);
        assert_eq!(pool.edge_probability(&pool.edges[0]), 0.5);
        assert_eq!(pool.pair_probability(NodeId(1), NodeId(0)), 0.0);
    }

    #[test]
    fn merging_endpoints_gives_degenerate_edge() {
        let mut g = Graph::new();
        let a = g.add_node("wash the car", "step");
        let b = g.add_node("wash the car today", "step");
        g.add_edge(a, b, "before");
        let pool = build_pool(&SampleSet::new(vec![g]), 0.5);
        assert!(pool.edges[0].is_degenerate());
    }
}
