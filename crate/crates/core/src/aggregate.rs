//! Turning a pool of sampled elements into one graph.
//!
//! Each pooled edge gets weight `(1 - lambda1) - p(e)` and each pooled node
//! `(1 - lambda2) - p(n)`, where `p` is the fraction of samples containing
//! the element. The aggregate is the minimum-weight selection subject to the
//! endpoint coupling and, optionally, acyclicity.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{build_pool, Pool, DEFAULT_JACCARD_THRESHOLD};
use crate::graph::{Edge, Graph, Node, NodeId};
use crate::sample_io::SampleSet;
use crate::solver::{
    self, Certificate, Coupling, Selection, SolverError, SolverOptions, WeightedSelectionProblem, WEIGHT_EPS,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Node and edge terms, separate lambdas.
    #[default]
    Full,
    /// Edge term only; nodes are the endpoints of kept edges.
    NoNodeTransforms,
    /// Full, with both lambdas pinned to 0.5.
    EqualLambda,
    /// Full, without the acyclicity constraint.
    NoDag,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoNodeTransforms, Variant::EqualLambda, Variant::NoDag];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoNodeTransforms => "no-node-transforms",
            Variant::EqualLambda => "equal-lambda",
            Variant::NoDag => "no-dag",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = AggregateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| AggregateError::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub variant: Variant,
    pub dag_constraints: bool,
    pub jaccard_threshold: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            variant: Variant::Full,
            dag_constraints: true,
            jaccard_threshold: DEFAULT_JACCARD_THRESHOLD,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

/// Parameters after the variant has been applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub lambda1: f64,
    /// `None` when the node term is absent.
    pub lambda2: Option<f64>,
    pub require_dag: bool,
}

impl AggregationConfig {
    pub fn with_lambdas(lambda1: f64, lambda2: f64) -> Self {
        Self { lambda1, lambda2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AggregateError> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(AggregateError::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.jaccard_threshold) {
            return Err(AggregateError::Config(format!(
                "jaccard_threshold = {} is outside [0, 1]",
                self.jaccard_threshold
            )));
        }
        Ok(())
    }

    pub fn effective(&self) -> EffectiveParams {
        match self.variant {
            Variant::Full => EffectiveParams {
                lambda1: self.lambda1,
                lambda2: Some(self.lambda2),
                require_dag: self.dag_constraints,
            },
            Variant::NoNodeTransforms => {
                EffectiveParams { lambda1: self.lambda1, lambda2: None, require_dag: self.dag_constraints }
            }
            Variant::EqualLambda => {
                EffectiveParams { lambda1: 0.5, lambda2: Some(0.5), require_dag: self.dag_constraints }
            }
            Variant::NoDag => EffectiveParams { lambda1: self.lambda1, lambda2: Some(self.lambda2), require_dag: false },
        }
    }
}

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no usable samples to aggregate")]
    EmptySamples,
    #[error(transparent)]
    Solver(SolverError),
    #[error("solver budget exhausted; a heuristic aggregate with objective {} is available", outcome.selection.objective)]
    Timeout { outcome: Box<AggregateOutcome> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome {
    pub graph: Graph,
    pub selection: Selection,
    pub problem: WeightedSelectionProblem,
}

impl AggregateOutcome {
    pub fn certificate(&self) -> Certificate {
        self.selection.certificate
    }
}

fn weight(lambda: f64, p: f64) -> f64 {
    let w = (1.0 - lambda) - p;
    if w.abs() <= WEIGHT_EPS {
        0.0
    } else {
        w
    }
}

/// Selection problem over the observed pool elements. Edges whose endpoints
/// merged into one pooled node are left out.
pub fn build_problem(pool: &Pool, cfg: &AggregationConfig) -> Result<WeightedSelectionProblem, AggregateError> {
    cfg.validate()?;
    if pool.sample_count == 0 {
        return Err(AggregateError::EmptySamples);
    }
    let params = cfg.effective();
    let mut problem = WeightedSelectionProblem { require_dag: params.require_dag, ..Default::default() };
    for e in pool.edges.iter().filter(|e| !e.is_degenerate() && !e.sample_ids.is_empty()) {
        let key = (e.head, e.tail);
        problem.edge_weights.insert(key, weight(params.lambda1, pool.edge_probability(e)));
        if params.lambda2.is_some() {
            problem.couplings.push(Coupling::for_edge(key));
        }
    }
    if let Some(lambda2) = params.lambda2 {
        for n in pool.nodes.iter().filter(|n| !n.sample_ids.is_empty()) {
            problem.node_weights.insert(n.id, weight(lambda2, pool.node_probability(n.id)));
        }
    }
    Ok(problem)
}

fn materialize(pool: &Pool, cfg: &AggregationConfig, problem: &WeightedSelectionProblem, sel: &Selection) -> Graph {
    let node_ids: BTreeSet<NodeId> = if cfg.effective().lambda2.is_some() {
        sel.chosen_nodes.clone()
    } else {
        sel.chosen_edges.iter().flat_map(|&(h, t)| [h, t]).collect()
    };
    let mut g = Graph::new();
    for id in node_ids {
        let p = pool.node(id);
        g.nodes.push(Node {
            id,
            content: p.representative_content.clone(),
            node_type: p.representative_type.clone(),
            span: p.representative_span(),
        });
    }
    for &(head, tail) in &sel.chosen_edges {
        let pe = pool.edges.iter().find(|e| e.head == head && e.tail == tail).expect("selected edge is pooled");
        g.edges.push(Edge { head, tail, edge_type: pe.representative_type.clone() });
    }
    let params = cfg.effective();
    let info = serde_json::json!({
        "variant": cfg.variant,
        "lambda1": params.lambda1,
        "lambda2": params.lambda2,
        "dag": problem.require_dag,
        "samples": pool.sample_count,
        "objective": sel.objective,
        "certificate": sel.certificate,
    });
    g.meta.insert("aggregate".into(), info);
    g
}

/// Aggregates an already-built pool; lets callers reuse one pool across a
/// grid of lambdas.
pub fn aggregate_detailed(pool: &Pool, cfg: &AggregationConfig) -> Result<AggregateOutcome, AggregateError> {
    let problem = build_problem(pool, cfg)?;
    match solver::solve(&problem, &cfg.solver) {
        Ok(selection) => {
            let graph = materialize(pool, cfg, &problem, &selection);
            Ok(AggregateOutcome { graph, selection, problem })
        }
        Err(SolverError::Timeout { best }) => {
            let selection = *best;
            let graph = materialize(pool, cfg, &problem, &selection);
            Err(AggregateError::Timeout { outcome: Box::new(AggregateOutcome { graph, selection, problem }) })
        }
        Err(e) => Err(AggregateError::Solver(e)),
    }
}

pub fn aggregate_pool(pool: &Pool, cfg: &AggregationConfig) -> Result<Graph, AggregateError> {
    aggregate_detailed(pool, cfg).map(|o| o.graph)
}

pub fn aggregate(samples: &SampleSet, cfg: &AggregationConfig) -> Result<Graph, AggregateError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(AggregateError::EmptySamples);
    }
    aggregate_pool(&build_pool(samples, cfg.jaccard_threshold), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds samples where each entry lists edges by content pair.
    fn samples(specs: &[&[(&str, &str)]], extra_nodes: &[&[&str]]) -> SampleSet {
        let mut out = Vec::new();
        for (i, edges) in specs.iter().enumerate() {
            let mut g = Graph::new();
            let id_of = |g: &mut Graph, c: &str| {
                g.nodes.iter().find(|n| n.content == c).map(|n| n.id).unwrap_or_else(|| g.add_node(c, "t"))
            };
            for c in extra_nodes.get(i).copied().unwrap_or(&[]) {
                id_of(&mut g, c);
            }
            for (h, t) in edges.iter() {
                let hi = id_of(&mut g, h);
                let ti = id_of(&mut g, t);
                g.add_edge(hi, ti, "r");
            }
            out.push(g);
        }
        SampleSet::new(out)
    }

    fn edge_contents(g: &Graph) -> Vec<(String, String)> {
        let content = |id: NodeId| g.node(id).unwrap().content.clone();
        g.edges.iter().map(|e| (content(e.head), content(e.tail))).collect()
    }

    #[test]
    fn edge_weights_by_hand() {
        // e1 in 3 of 4 samples, e2 in 2, e3 in 1.
        let s = samples(
            &[&[("a", "b"), ("b", "c"), ("c", "d")], &[("a", "b"), ("b", "c")], &[("a", "b")], &[]],
            &[&[], &[], &[], &["a"]],
        );
        let pool = build_pool(&s, 0.5);
        let cfg = AggregationConfig { lambda1: 0.6, variant: Variant::NoNodeTransforms, ..Default::default() };
        let p = build_problem(&pool, &cfg).unwrap();
        let w: Vec<f64> = p.edge_weights.values().copied().collect();
        let expected = [-0.35, -0.10, 0.15];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
        assert!(p.node_weights.is_empty() && p.couplings.is_empty());
    }

    #[test]
    fn lambda_boundaries() {
        let s = samples(&[&[("a", "b")], &[("b", "c")]], &[]);
        let pool = build_pool(&s, 0.5);
        let p1 = build_problem(&pool, &AggregationConfig::with_lambdas(1.0, 1.0)).unwrap();
        assert!(p1.edge_weights.values().all(|&w| w < 0.0));
        let g0 = aggregate(&s, &AggregationConfig::with_lambdas(0.0, 0.0)).unwrap();
        assert!(g0.nodes.is_empty() && g0.edges.is_empty());
    }

    #[test]
    fn single_sample_is_returned() {
        let s = samples(&[&[("a", "b"), ("b", "c"), ("a", "c")]], &[&["lonely"]]);
        let g = aggregate(&s, &AggregationConfig::with_lambdas(0.7, 0.7)).unwrap();
        assert!(g.same_structure(&s.samples[0]));
    }

    #[test]
    fn two_cycle_keeps_stronger_direction() {
        // p(a->b) = 0.9, p(b->a) = 0.8 over 10 samples.
        let mut specs: Vec<&[(&str, &str)]> = Vec::new();
        specs.extend(std::iter::repeat_n(&[("a", "b"), ("b", "a")][..], 7));
        specs.push(&[("a", "b")]);
        specs.push(&[("a", "b")]);
        specs.push(&[("b", "a")]);
        let s = samples(&specs, &[]);
        let cfg = AggregationConfig { lambda1: 0.5, variant: Variant::NoNodeTransforms, ..Default::default() };
        let g = aggregate(&s, &cfg).unwrap();
        assert_eq!(edge_contents(&g), vec![("a".to_string(), "b".to_string())]);
        let full = aggregate(&s, &AggregationConfig::with_lambdas(0.5, 0.5)).unwrap();
        assert_eq!(edge_contents(&full), vec![("a".to_string(), "b".to_string())]);
        let nodag = aggregate(&s, &AggregationConfig { variant: Variant::NoDag, ..Default::default() }).unwrap();
        assert_eq!(nodag.edges.len(), 2);
    }

    #[test]
    fn coupling_example_selects_all_three() {
        // p(n1) = 1.0, p(n2) = 0.3, p(n1 -> n2) = 0.3 cannot exceed p(n2), so
        // build the problem directly.
        let mut p = WeightedSelectionProblem { require_dag: true, ..Default::default() };
        p.node_weights.insert(NodeId(1), weight(0.5, 1.0));
        p.node_weights.insert(NodeId(2), weight(0.5, 0.3));
        p.edge_weights.insert((NodeId(1), NodeId(2)), weight(0.5, 0.9));
        p.couplings.push(Coupling::for_edge((NodeId(1), NodeId(2))));
        let s = solver::solve(&p, &SolverOptions::default()).unwrap();
        assert!((s.objective + 0.7).abs() < 1e-12);
        assert_eq!(s.chosen_nodes.len(), 2);
        assert_eq!(s.chosen_edges.len(), 1);
    }

    #[test]
    fn equal_lambda_is_empty_when_all_edges_rare() {
        let s = samples(&[&[("a", "b")], &[("b", "c")], &[("c", "d")]], &[]);
        let cfg = AggregationConfig { lambda1: 0.95, lambda2: 0.95, variant: Variant::EqualLambda, ..Default::default() };
        assert!(aggregate(&s, &cfg).unwrap().edges.is_empty());
    }

    #[test]
    fn ties_exclude() {
        // p = 0.5 and lambda = 0.5 gives weight exactly zero.
        let s = samples(&[&[("a", "b")], &[("c", "d")]], &[]);
        let cfg = AggregationConfig { variant: Variant::NoNodeTransforms, ..Default::default() };
        let g = aggregate(&s, &cfg).unwrap();
        assert!(g.edges.is_empty() && g.nodes.is_empty());
    }

    #[test]
    fn invalid_config() {
        let s = samples(&[&[("a", "b")]], &[]);
        assert!(matches!(
            aggregate(&s, &AggregationConfig::with_lambdas(1.5, 0.5)),
            Err(AggregateError::Config(_))
        ));
        assert!(matches!(
            aggregate(&SampleSet::default(), &AggregationConfig::default()),
            Err(AggregateError::EmptySamples)
        ));
        assert!("no-dag".parse::<Variant>().is_ok());
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn spans_and_types_come_from_representatives() {
        let mut a = Graph::new();
        let n = a.add_node("dry dishes", "step");
        a.nodes[0].span = Some(crate::graph::Span::new(0, 10));
        let m = a.add_node("put away", "step");
        a.add_edge(n, m, "before");
        let s = SampleSet::new(vec![a.clone(), a]);
        let g = aggregate(&s, &AggregationConfig::default()).unwrap();
        assert_eq!(g.nodes[0].span, Some(crate::graph::Span::new(0, 10)));
        assert_eq!(g.edges[0].edge_type, "before");
        assert_eq!(g.meta["aggregate"]["samples"], 2);
    }
}
