//! Synthetic sweep: generate truth, corrupt it into T samples, aggregate with
//! each variant, and score against the truth. The first sample of every set
//! is scored as a single-sample baseline.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{aggregate_pool, AggregateError, AggregationConfig, Variant};
use crate::canonical::{build_pool, DEFAULT_JACCARD_THRESHOLD};
use crate::graph::{edge_multiset_f1, Graph};
use crate::metrics::{edge_errors, graph_edit_distance, GedMode, EXACT_GED_MAX_NODES};
use crate::solver::SolverOptions;
use crate::synth::{corrupt, generate_truth, NoiseModel};
use crate::tuner::{parse_grid, tune, LabeledInstance, TuneMetric};

pub const BASELINE: &str = "baseline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMetric {
    EdgeF1,
    NodeRecall,
    Ged,
    SpuriousEdges,
    OmittedEdges,
    ReversedEdges,
}

impl PipelineMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMetric::EdgeF1 => "edge_f1",
            PipelineMetric::NodeRecall => "node_recall",
            PipelineMetric::Ged => "ged",
            PipelineMetric::SpuriousEdges => "spurious_edges",
            PipelineMetric::OmittedEdges => "omitted_edges",
            PipelineMetric::ReversedEdges => "reversed_edges",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed {
        lambda1: f64,
        lambda2: f64,
    },
    /// Tune on freshly generated held-out instances for every cell.
    Tuned {
        #[serde(default = "default_tune_instances")]
        instances: usize,
        #[serde(default = "default_grid_spec")]
        grid: String,
        #[serde(default)]
        metric: TuneMetric,
    },
}

fn default_tune_instances() -> usize {
    5
}

fn default_grid_spec() -> String {
    "0:1:0.1".into()
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Fixed { lambda1: 0.5, lambda2: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub nodes: usize,
    pub density: f64,
    /// The `seed` field is ignored; every run seed derives its own.
    pub noise: NoiseModel,
    pub t_values: Vec<usize>,
    pub seeds: usize,
    pub seed_start: u64,
    pub variants: Vec<Variant>,
    pub lambda: LambdaChoice,
    pub jaccard_threshold: f64,
    pub metrics: Vec<PipelineMetric>,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nodes: 8,
            density: 0.35,
            noise: NoiseModel::default(),
            t_values: vec![10],
            seeds: 10,
            seed_start: 0,
            variants: vec![Variant::Full],
            lambda: LambdaChoice::default(),
            jaccard_threshold: DEFAULT_JACCARD_THRESHOLD,
            metrics: vec![
                PipelineMetric::EdgeF1,
                PipelineMetric::NodeRecall,
                PipelineMetric::SpuriousEdges,
                PipelineMetric::OmittedEdges,
                PipelineMetric::ReversedEdges,
            ],
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| PipelineError { stage: "config", message: m };
        if self.nodes == 0 {
            return Err(bad("nodes must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(bad(format!("density {} is outside [0, 1]", self.density)));
        }
        if self.t_values.is_empty() || self.t_values.contains(&0) {
            return Err(bad("t_values must be non-empty and positive".into()));
        }
        if self.seeds == 0 || self.variants.is_empty() || self.metrics.is_empty() {
            return Err(bad("seeds, variants and metrics must be non-empty".into()));
        }
        self.noise.validate().map_err(|e| bad(e.to_string()))?;
        match &self.lambda {
            LambdaChoice::Fixed { lambda1, lambda2 } => {
                AggregationConfig::with_lambdas(*lambda1, *lambda2).validate().map_err(|e| bad(e.to_string()))?
            }
            LambdaChoice::Tuned { instances, grid, .. } => {
                if *instances < 2 {
                    return Err(bad("tuning needs at least 2 instances".into()));
                }
                parse_grid(grid).map_err(|e| bad(e.to_string()))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub variant: String,
    pub t: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub t: usize,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenLambda {
    pub variant: String,
    pub t: usize,
    pub seed: u64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
    pub lambdas: Vec<ChosenLambda>,
    /// Aggregations that hit the solver budget and used a heuristic answer.
    pub timeouts: usize,
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SALT_TRUTH: u64 = 1;
const SALT_NOISE: u64 = 2;
const SALT_TUNE: u64 = 1000;

/// Fraction of truth node contents present in `pred` (case-insensitive).
pub fn node_recall(pred: &Graph, truth: &Graph) -> f64 {
    if truth.nodes.is_empty() {
        return 1.0;
    }
    let have: BTreeSet<String> = pred.nodes.iter().map(|n| n.content.trim().to_lowercase()).collect();
    let hit = truth.nodes.iter().filter(|n| have.contains(&n.content.trim().to_lowercase())).count();
    hit as f64 / truth.nodes.len() as f64
}

fn score(metric: PipelineMetric, pred: &Graph, truth: &Graph) -> f64 {
    match metric {
        PipelineMetric::EdgeF1 => edge_multiset_f1(pred, truth),
        PipelineMetric::NodeRecall => node_recall(pred, truth),
        PipelineMetric::Ged => {
            let small = pred.nodes.len().max(truth.nodes.len()) <= EXACT_GED_MAX_NODES;
            let mode = if small { GedMode::Exact } else { GedMode::Greedy };
            graph_edit_distance(pred, truth, mode).expect("mode chosen within bounds")
        }
        PipelineMetric::SpuriousEdges => edge_errors(pred, truth).spurious_edges as f64,
        PipelineMetric::OmittedEdges => edge_errors(pred, truth).omitted_edges as f64,
        PipelineMetric::ReversedEdges => edge_errors(pred, truth).reversed_edges as f64,
    }
}

/// One labeled instance for a run seed: the truth and its T samples.
pub fn instance(cfg: &PipelineConfig, seed: u64, t: usize) -> Result<LabeledInstance, PipelineError> {
    let truth = generate_truth(cfg.nodes, cfg.density, mix_seed(seed, SALT_TRUTH));
    let noise = NoiseModel { seed: mix_seed(seed, SALT_NOISE), ..cfg.noise.clone() };
    let samples = corrupt(&truth, &noise, t).map_err(|e| PipelineError { stage: "synth", message: e.to_string() })?;
    Ok(LabeledInstance { samples, gold: truth })
}

/// Held-out tuning instances for a run seed; disjoint from the evaluated one.
pub fn tuning_instances(cfg: &PipelineConfig, seed: u64, t: usize, count: usize) -> Result<Vec<LabeledInstance>, PipelineError> {
    (0..count as u64).map(|k| instance(cfg, mix_seed(seed, SALT_TUNE + k), t)).collect()
}

struct Cell {
    variant: Variant,
    t: usize,
    seed: u64,
}

struct CellOutput {
    rows: Vec<Row>,
    lambda: Option<ChosenLambda>,
    timed_out: bool,
}

fn run_cell(cfg: &PipelineConfig, cell: &Cell, inst: &LabeledInstance) -> Result<CellOutput, PipelineError> {
    let base = AggregationConfig {
        variant: cell.variant,
        jaccard_threshold: cfg.jaccard_threshold,
        seed: cell.seed,
        solver: cfg.solver.clone(),
        ..Default::default()
    };
    let (lambda1, lambda2, lambda) = match &cfg.lambda {
        LambdaChoice::Fixed { lambda1, lambda2 } => (*lambda1, *lambda2, None),
        LambdaChoice::Tuned { instances, grid, metric } => {
            let held_out = tuning_instances(cfg, cell.seed, cell.t, *instances)?;
            let grid = parse_grid(grid).map_err(|e| PipelineError { stage: "tune", message: e.to_string() })?;
            let r = tune(&held_out, &grid, *metric, &base)
                .map_err(|e| PipelineError { stage: "tune", message: e.to_string() })?;
            let chosen = ChosenLambda {
                variant: cell.variant.to_string(),
                t: cell.t,
                seed: cell.seed,
                lambda1: r.best_lambda1,
                lambda2: r.best_lambda2,
            };
            (r.best_lambda1, r.best_lambda2, Some(chosen))
        }
    };
    let agg = AggregationConfig { lambda1, lambda2, ..base };
    let pool = build_pool(&inst.samples, agg.jaccard_threshold);
    let (pred, timed_out) = match aggregate_pool(&pool, &agg) {
        Ok(g) => (g, false),
        Err(AggregateError::Timeout { outcome }) => (outcome.graph, true),
        Err(e) => return Err(PipelineError { stage: "aggregate", message: e.to_string() }),
    };
    let rows = cfg
        .metrics
        .iter()
        .map(|&m| Row {
            variant: cell.variant.to_string(),
            t: cell.t,
            seed: cell.seed,
            metric: m.as_str().into(),
            value: score(m, &pred, &inst.gold),
        })
        .collect();
    Ok(CellOutput { rows, lambda, timed_out })
}

fn summarize(rows: &[Row], variant_order: &[String], metric_order: &[PipelineMetric]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    let mut ts: Vec<usize> = rows.iter().map(|r| r.t).collect();
    ts.sort();
    ts.dedup();
    for v in variant_order {
        for &t in &ts {
            for m in metric_order {
                let vals: Vec<f64> =
                    rows.iter().filter(|r| r.variant == *v && r.t == t && r.metric == m.as_str()).map(|r| r.value).collect();
                if vals.is_empty() {
                    continue;
                }
                let n = vals.len();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let stddev = if n > 1 {
                    (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                out.push(SummaryRow { variant: v.clone(), t, metric: m.as_str().into(), n, mean, stddev });
            }
        }
    }
    out
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineResult, PipelineError> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed_start + i).collect();
    let mut ts = cfg.t_values.clone();
    ts.sort();
    ts.dedup();
    let mut variants = cfg.variants.clone();
    variants.dedup();

    let instances: Vec<((u64, usize), LabeledInstance)> = seeds
        .par_iter()
        .flat_map_iter(|&s| ts.iter().map(move |&t| (s, t)))
        .map(|(s, t)| instance(cfg, s, t).map(|i| ((s, t), i)))
        .collect::<Result<_, _>>()?;
    let lookup = |s: u64, t: usize| &instances.iter().find(|((a, b), _)| *a == s && *b == t).expect("generated").1;

    let mut cells: Vec<Cell> = Vec::new();
    for &variant in &variants {
        for &t in &ts {
            cells.extend(seeds.iter().map(|&seed| Cell { variant, t, seed }));
        }
    }
    let outputs: Vec<CellOutput> =
        cells.par_iter().map(|c| run_cell(cfg, c, lookup(c.seed, c.t))).collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for &t in &ts {
        for &seed in &seeds {
            let inst = lookup(seed, t);
            let first = inst.samples.samples.first().cloned().unwrap_or_default();
            rows.extend(cfg.metrics.iter().map(|&m| Row {
                variant: BASELINE.into(),
                t,
                seed,
                metric: m.as_str().into(),
                value: score(m, &first, &inst.gold),
            }));
        }
    }
    let mut lambdas = Vec::new();
    let mut timeouts = 0;
    for o in outputs {
        rows.extend(o.rows);
        lambdas.extend(o.lambda);
        timeouts += usize::from(o.timed_out);
    }
    let order: Vec<String> = std::iter::once(BASELINE.to_string()).chain(variants.iter().map(|v| v.to_string())).collect();
    let summary = summarize(&rows, &order, &cfg.metrics);
    Ok(PipelineResult { rows, summary, lambdas, timeouts })
}

pub fn rows_csv(rows: &[Row]) -> String {
    let mut s = String::from("variant,T,seed,metric,value\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.variant, r.t, r.seed, r.metric, r.value).unwrap();
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("variant,T,metric,n,mean,stddev\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{},{}", r.variant, r.t, r.metric, r.n, r.mean, r.stddev).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_everything_scores_one() {
        let cfg = PipelineConfig {
            t_values: vec![1, 5, 10],
            seeds: 3,
            variants: Variant::ALL.to_vec(),
            metrics: vec![PipelineMetric::EdgeF1, PipelineMetric::NodeRecall],
            lambda: LambdaChoice::Fixed { lambda1: 0.7, lambda2: 0.7 },
            ..Default::default()
        };
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.rows.len(), (1 + 4) * 3 * 3 * 2);
        for row in &r.rows {
            // Without a node term, isolated truth nodes cannot be recovered.
            if row.variant == "no-node-transforms" && row.metric == "node_recall" {
                continue;
            }
            assert_eq!(row.value, 1.0, "{row:?}");
        }
        assert_eq!(r.timeouts, 0);
    }

    #[test]
    fn deterministic_csv() {
        let cfg = PipelineConfig {
            noise: NoiseModel { edge_delete_prob: 0.3, edge_add_prob: 0.05, ..Default::default() },
            seeds: 4,
            ..Default::default()
        };
        let a = run_pipeline(&cfg).unwrap();
        let b = run_pipeline(&cfg).unwrap();
        assert_eq!(rows_csv(&a.rows), rows_csv(&b.rows));
        assert_eq!(summary_csv(&a.summary), summary_csv(&b.summary));
        assert!(rows_csv(&a.rows).starts_with("variant,T,seed,metric,value\nbaseline,10,0,edge_f1,"));
    }

    #[test]
    fn tuned_lambdas_are_reported() {
        let cfg = PipelineConfig {
            seeds: 2,
            noise: NoiseModel { edge_delete_prob: 0.3, ..Default::default() },
            lambda: LambdaChoice::Tuned { instances: 3, grid: "0.2,0.5,0.8".into(), metric: TuneMetric::EdgeF1 },
            ..Default::default()
        };
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.lambdas.len(), 2);
    }

    #[test]
    fn config_from_toml() {
        let text = r#"
            nodes = 6
            t_values = [5, 10]
            variants = ["full", "equal-lambda"]
            metrics = ["edge_f1", "ged"]
            [noise]
            edge_delete_prob = 0.3
            [lambda]
            mode = "tuned"
            instances = 5
        "#;
        let cfg: PipelineConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.nodes, 6);
        assert!(matches!(cfg.lambda, LambdaChoice::Tuned { instances: 5, .. }));
        let bad = PipelineConfig { t_values: vec![], ..Default::default() };
        assert_eq!(bad.validate().unwrap_err().stage, "config");
    }

    #[test]
    fn summary_statistics() {
        let rows: Vec<Row> = [1.0, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| Row { variant: "full".into(), t: 5, seed: i as u64, metric: "edge_f1".into(), value: v })
            .collect();
        let s = summarize(&rows, &["full".into()], &[PipelineMetric::EdgeF1]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 0.5);
        assert!((s[0].stddev - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
