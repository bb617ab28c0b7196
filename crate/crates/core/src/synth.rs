//! Synthetic ground-truth DAGs and noisy sample sets.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, NodeId};
use crate::sample_io::{SampleSet, SampleSource};

const WORDS: &[&str] = &[
    "amber", "basin", "cedar", "delta", "ember", "fjord", "grove", "harbor", "island", "jasper", "kernel", "lantern",
    "meadow", "nectar", "orchid", "pepper", "quartz", "raven", "saddle", "timber", "umber", "velvet", "willow",
    "xenon", "yarrow", "zephyr", "anchor", "bramble", "copper", "dune", "falcon", "garnet", "hollow", "ivory",
    "juniper", "kettle", "lagoon", "marble", "nutmeg", "oyster", "pebble", "quill", "ripple", "spruce", "thistle",
    "upland", "violet", "walnut", "yonder", "zinnia", "acorn", "beacon", "canyon", "drift", "eagle", "fennel",
    "glacier", "heron", "indigo", "jetty", "kiln", "linen", "maple", "nimbus", "onyx", "prairie", "quiver", "russet",
    "sable", "tundra", "urchin", "vessel", "wren", "yew", "zircon", "aspen", "birch", "cobalt", "dahlia", "elm",
    "flint", "gull", "hazel", "iris", "jade", "kelp", "lichen", "moss", "nettle", "opal", "plume", "quince", "reed",
    "sorrel", "tansy", "umbra", "vale", "wisp", "yucca", "zest",
];
const TOKENS_PER_NODE: usize = 3;
const NODE_TYPES: &[&str] = &["event", "state", "action"];
const EDGE_TYPES: &[&str] = &["before", "causes", "enables"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid noise model: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub edge_delete_prob: f64,
    /// Applied independently to every absent ordered pair that may be added.
    pub edge_add_prob: f64,
    pub node_delete_prob: f64,
    /// Per-token rate of dropping or duplicating a content token.
    pub content_paraphrase_prob: f64,
    pub seed: u64,
    /// Lets added edges go against the truth's topological order.
    pub allow_cycles: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            edge_delete_prob: 0.0,
            edge_add_prob: 0.0,
            node_delete_prob: 0.0,
            content_paraphrase_prob: 0.0,
            seed: 0,
            allow_cycles: false,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, p) in [
            ("edge_delete_prob", self.edge_delete_prob),
            ("edge_add_prob", self.edge_add_prob),
            ("node_delete_prob", self.node_delete_prob),
            ("content_paraphrase_prob", self.content_paraphrase_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let m: NoiseModel = toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

fn word(i: usize) -> String {
    let base = WORDS[i % WORDS.len()];
    match i / WORDS.len() {
        0 => base.to_string(),
        k => format!("{base}{k}"),
    }
}

/// Random DAG on `n_nodes` nodes: a random topological order, with each
/// forward pair present with probability `edge_density`. Node contents use
/// disjoint words, so distinct nodes never share a token.
pub fn generate_truth(n_nodes: usize, edge_density: f64, seed: u64) -> Graph {
    let density = edge_density.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<usize> = (0..(n_nodes * TOKENS_PER_NODE).max(WORDS.len())).collect();
    words.shuffle(&mut rng);
    let mut g = Graph::new();
    for i in 0..n_nodes {
        let content: Vec<String> =
            words[i * TOKENS_PER_NODE..(i + 1) * TOKENS_PER_NODE].iter().map(|&w| word(w)).collect();
        let ty = NODE_TYPES[rng.random_range(0..NODE_TYPES.len())];
        g.add_node(content.join(" "), ty);
    }
    let mut order: Vec<NodeId> = g.nodes.iter().map(|n| n.id).collect();
    order.shuffle(&mut rng);
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if rng.random_bool(density) {
                let ty = EDGE_TYPES[rng.random_range(0..EDGE_TYPES.len())];
                g.add_edge(order[i], order[j], ty);
            }
        }
    }
    g.edges.sort_by_key(|e| (e.head, e.tail));
    g
}

fn paraphrase(content: &str, rate: f64, rng: &mut ChaCha8Rng) -> String {
    let tokens: Vec<&str> = content.split_whitespace().collect();
    let mut out: Vec<&str> = Vec::with_capacity(tokens.len() + 2);
    for t in &tokens {
        if rng.random_bool(rate) {
            if rng.random_bool(0.5) {
                continue;
            }
            out.push(t);
        }
        out.push(t);
    }
    if out.is_empty() {
        out.push(tokens[rng.random_range(0..tokens.len())]);
    }
    out.join(" ")
}

fn corrupt_one(truth: &Graph, order: &[NodeId], noise: &NoiseModel, index: usize) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(index as u64);

    let kept: BTreeSet<NodeId> = truth.nodes.iter().filter(|_| !rng.random_bool(noise.node_delete_prob)).map(|n| n.id).collect();
    let mut g = Graph::new();
    g.meta = truth.meta.clone();
    for n in truth.nodes.iter().filter(|n| kept.contains(&n.id)) {
        let mut node = n.clone();
        if noise.content_paraphrase_prob > 0.0 {
            node.content = paraphrase(&n.content, noise.content_paraphrase_prob, &mut rng);
        }
        g.nodes.push(node);
    }
    for e in &truth.edges {
        if kept.contains(&e.head) && kept.contains(&e.tail) && !rng.random_bool(noise.edge_delete_prob) {
            g.edges.push(e.clone());
        }
    }
    if noise.edge_add_prob > 0.0 {
        let present: BTreeSet<(NodeId, NodeId)> = truth.edges.iter().map(|e| (e.head, e.tail)).collect();
        for (i, &h) in order.iter().enumerate() {
            for (j, &t) in order.iter().enumerate() {
                let allowed = if noise.allow_cycles { i != j } else { i < j };
                if !allowed || present.contains(&(h, t)) || !kept.contains(&h) || !kept.contains(&t) {
                    continue;
                }
                if rng.random_bool(noise.edge_add_prob) {
                    let ty = EDGE_TYPES[rng.random_range(0..EDGE_TYPES.len())];
                    g.edges.push(Edge { head: h, tail: t, edge_type: ty.to_string() });
                }
            }
        }
    }
    g.edges.sort_by_key(|e| (e.head, e.tail));
    g
}

/// `t_samples` independent corrupted copies of `truth`. Sample `i` draws from
/// its own random stream, so results do not depend on scheduling.
pub fn corrupt(truth: &Graph, noise: &NoiseModel, t_samples: usize) -> Result<SampleSet, SynthError> {
    noise.validate()?;
    let order = truth.topological_order().unwrap_or_else(|_| truth.nodes.iter().map(|n| n.id).collect());
    let samples: Vec<Graph> = (0..t_samples).into_par_iter().map(|i| corrupt_one(truth, &order, noise, i)).collect();
    Ok(SampleSet {
        samples,
        rejects: Vec::new(),
        source: SampleSource { seed: Some(noise.seed), ..Default::default() },
    })
}
