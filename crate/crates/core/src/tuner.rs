//! Leave-one-out selection of `(lambda1, lambda2)` over a grid.
//!
//! Aggregation has no fitted parameters besides the lambdas, so each fold
//! holds out a single instance, aggregates its samples at every grid pair and
//! scores the result against its gold graph. The surface value of a pair is
//! the mean held-out score over all folds.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{aggregate_pool, AggregateError, AggregationConfig};
use crate::canonical::{build_pool, Pool};
use crate::graph::{edge_multiset_f1, Graph};
use crate::metrics::{evaluate_instance, EvalError, EvalOptions, Task};
use crate::sample_io::SampleSet;

/// Scores within this distance of the best count as ties.
const SCORE_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub samples: SampleSet,
    pub gold: Graph,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMetric {
    #[default]
    EdgeF1,
    CF1,
    R50F1,
}

impl TuneMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            TuneMetric::EdgeF1 => "edge_f1",
            TuneMetric::CF1 => "c_f1",
            TuneMetric::R50F1 => "r50_f1",
        }
    }

    pub fn score(self, pred: &Graph, gold: &Graph) -> Result<f64, TuneError> {
        match self {
            TuneMetric::EdgeF1 => Ok(edge_multiset_f1(pred, gold)),
            TuneMetric::CF1 | TuneMetric::R50F1 => {
                let r = evaluate_instance(0, pred, gold, Task::Argmine, &EvalOptions::default())?;
                let v = if self == TuneMetric::CF1 { r.c_f1 } else { r.r50_f1 };
                Ok(v.unwrap_or(0.0))
            }
        }
    }
}

impl fmt::Display for TuneMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TuneMetric {
    type Err = TuneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [TuneMetric::EdgeF1, TuneMetric::CF1, TuneMetric::R50F1]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| TuneError::Config(format!("unknown metric {s:?}; expected edge_f1, c_f1 or r50_f1")))
    }
}

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("invalid tuning setup: {0}")]
    Config(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_lambda1: f64,
    pub best_lambda2: f64,
    pub best_score: f64,
    pub metric: TuneMetric,
    pub folds: usize,
    /// Sorted by `lambda1`, then `lambda2`.
    pub surface: Vec<SurfacePoint>,
}

/// Parses `start:end:step` (inclusive) or a comma-separated list. Values are
/// rounded to 10 decimals so that `0:1:0.1` yields exactly 0.3, not
/// 0.30000000000000004.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, TuneError> {
    let bad = |m: String| TuneError::Config(format!("grid {spec:?}: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let round = |v: f64| (v * 1e10).round() / 1e10;
    let mut values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err(bad("expected start:end:step".into()));
        };
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if step <= 0.0 || end < start {
            return Err(bad("step must be positive and end >= start".into()));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| round(start + i as f64 * step)).collect::<Vec<_>>()
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<Vec<_>, _>>()?
    };
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(bad(format!("value {v} is outside [0, 1]")));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values)
}

pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Held-out score of every instance at one lambda pair.
pub fn fold_scores(
    pools: &[Pool],
    instances: &[LabeledInstance],
    lambda1: f64,
    lambda2: f64,
    metric: TuneMetric,
    base: &AggregationConfig,
) -> Result<Vec<f64>, TuneError> {
    let cfg = AggregationConfig { lambda1, lambda2, ..base.clone() };
    pools
        .iter()
        .zip(instances)
        .map(|(pool, inst)| {
            let pred = match aggregate_pool(pool, &cfg) {
                Ok(g) => g,
                Err(AggregateError::Timeout { outcome }) => outcome.graph,
                Err(e) => return Err(e.into()),
            };
            metric.score(&pred, &inst.gold)
        })
        .collect()
}

/// Best point of a surface: highest score, ties to smaller `lambda1`, then
/// smaller `lambda2`.
pub fn argmax(surface: &[SurfacePoint]) -> Option<SurfacePoint> {
    let mut sorted: Vec<SurfacePoint> = surface.to_vec();
    sorted.sort_by(|a, b| a.lambda1.total_cmp(&b.lambda1).then(a.lambda2.total_cmp(&b.lambda2)));
    let mut best: Option<SurfacePoint> = None;
    for p in sorted {
        if best.map_or(true, |b| p.score > b.score + SCORE_TIE_EPS) {
            best = Some(p);
        }
    }
    best
}

pub fn tune(
    instances: &[LabeledInstance],
    grid: &[f64],
    metric: TuneMetric,
    base: &AggregationConfig,
) -> Result<TuneResult, TuneError> {
    if instances.len() < 2 {
        return Err(TuneError::Config(format!("need at least 2 labeled instances, got {}", instances.len())));
    }
    if grid.is_empty() {
        return Err(TuneError::Config("empty grid".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(TuneError::Config(format!("grid value {v} is outside [0, 1]")));
    }
    if let Some(i) = instances.iter().position(|i| i.samples.is_empty()) {
        return Err(TuneError::Config(format!("instance {i} has no samples")));
    }
    base.validate()?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let pools: Vec<Pool> = instances.par_iter().map(|i| build_pool(&i.samples, base.jaccard_threshold)).collect();
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| (a, b))).collect();
    let surface = pairs
        .par_iter()
        .map(|&(l1, l2)| {
            let scores = fold_scores(&pools, instances, l1, l2, metric, base)?;
            let score = scores.iter().sum::<f64>() / scores.len() as f64;
            Ok(SurfacePoint { lambda1: l1, lambda2: l2, score })
        })
        .collect::<Result<Vec<_>, TuneError>>()?;
    let best = argmax(&surface).expect("non-empty grid");
    log::info!(
        "tuned over {} pairs and {} folds: lambda1={} lambda2={} {}={:.4}",
        surface.len(),
        instances.len(),
        best.lambda1,
        best.lambda2,
        metric,
        best.score
    );
    Ok(TuneResult {
        best_lambda1: best.lambda1,
        best_lambda2: best.lambda2,
        best_score: best.score,
        metric,
        folds: instances.len(),
        surface,
    })
}

pub fn write_surface_csv(surface: &[SurfacePoint], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "lambda1,lambda2,score")?;
    let mut rows = surface.to_vec();
    rows.sort_by(|a, b| a.lambda1.total_cmp(&b.lambda1).then(a.lambda2.total_cmp(&b.lambda2)));
    for p in rows {
        writeln!(out, "{},{},{}", p.lambda1, p.lambda2, p.score)?;
    }
    Ok(())
}

pub fn score_surface_csv(result: &TuneResult, path: impl AsRef<Path>) -> Result<(), TuneError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_surface_csv(&result.surface, &mut buf).expect("writing to memory");
    std::fs::write(path, buf).map_err(|source| TuneError::Io { path: path.to_path_buf(), source })
}
