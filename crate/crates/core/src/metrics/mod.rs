//! Automatic evaluation of predicted graphs against gold graphs.

mod ged;
mod spans;
mod structural;
mod triples;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ged::{edit_count, graph_edit_distance, GedMode, GedSizeError, EXACT_GED_MAX_NODES};
pub use spans::{
    bio_decode, bio_encode, component_f1, locate_spans, match_relations, relation_f1, BioLabel, LabeledSpan, Overlap,
    OverlapDenominator, PartialMatchOptions, SpanError,
};
pub use structural::{edge_errors, structural_accuracy, ErrorCounts};
pub use triples::{triple_f1, triples, Triple};

use crate::graph::{edge_multiset_f1, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Argmine,
    Explagraph,
    Proscript,
    Semgraph,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Argmine, Task::Explagraph, Task::Proscript, Task::Semgraph];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Argmine => "argmine",
            Task::Explagraph => "explagraph",
            Task::Proscript => "proscript",
            Task::Semgraph => "semgraph",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| EvalError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("instance {index}: {source}")]
    Span {
        index: usize,
        #[source]
        source: SpanError,
    },
    #[error("instance {index}: {source}")]
    Ged {
        index: usize,
        #[source]
        source: GedSizeError,
    },
    #[error("{pred} predictions but {gold} gold graphs")]
    CountMismatch { pred: usize, gold: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Forces a GED mode; by default exact search is used when both graphs
    /// are small enough and greedy matching otherwise.
    pub ged_mode: Option<GedMode>,
    pub partial: PartialMatchOptions,
}

/// Scores for one instance or a macro average over a corpus. Metrics that do
/// not apply to the task are `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Option<Task>,
    pub instances: usize,
    pub c_f1: Option<f64>,
    pub c_precision: Option<f64>,
    pub c_recall: Option<f64>,
    pub r100_f1: Option<f64>,
    pub r50_f1: Option<f64>,
    pub edge_f1: Option<f64>,
    pub t_f1: Option<f64>,
    pub g_f1: Option<f64>,
    pub stca: Option<f64>,
    pub ged: Option<f64>,
    /// Set when any GED value came from greedy matching (an upper bound).
    pub ged_mode: Option<GedMode>,
    /// Needs a trained stance classifier; never computed here.
    pub seca: Option<f64>,
    /// Needs contextual-embedding scoring; never computed here.
    pub g_bs: Option<f64>,
    pub error_counts: ErrorCounts,
}

fn meta_str<'a>(g: &'a Graph, key: &str) -> Option<&'a str> {
    g.meta.get(key).and_then(|v| v.as_str())
}

/// Keeps only nodes that carry a span, and the edges between them.
fn spanned_only(g: &Graph) -> Graph {
    let mut out = g.clone();
    out.nodes.retain(|n| n.span.is_some());
    out.edges.retain(|e| g.node(e.head).is_some_and(|n| n.span.is_some()) && g.node(e.tail).is_some_and(|n| n.span.is_some()));
    out
}

/// Scores a single prediction. For argument mining, predicted nodes without
/// spans are located in the gold document tokens (`meta.tokens`) when given;
/// nodes that still lack a span are ignored by the span metrics.
pub fn evaluate_instance(
    index: usize,
    pred: &Graph,
    gold: &Graph,
    task: Task,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut r = EvalReport {
        task: Some(task),
        instances: 1,
        edge_f1: Some(edge_multiset_f1(pred, gold)),
        error_counts: edge_errors(pred, gold),
        ..Default::default()
    };
    match task {
        Task::Argmine => {
            let mut located = pred.clone();
            if let Some(tokens) = gold.meta.get("tokens").and_then(|v| v.as_array()) {
                let doc: Vec<String> = tokens.iter().filter_map(|t| t.as_str().map(String::from)).collect();
                locate_spans(&mut located, &doc);
            }
            let located = spanned_only(&located);
            let span_err = |source| EvalError::Span { index, source };
            let c = component_f1(&located, gold).map_err(span_err)?;
            r.c_f1 = Some(c.f1);
            r.c_precision = Some(c.precision);
            r.c_recall = Some(c.recall);
            r.r100_f1 = Some(relation_f1(&located, gold, Overlap::Exact).f1);
            r.r50_f1 = Some(relation_f1(&located, gold, Overlap::Partial(opts.partial)).f1);
        }
        Task::Explagraph | Task::Proscript => {
            if task == Task::Explagraph {
                if let (Some(b), Some(a)) = (meta_str(gold, "belief"), meta_str(gold, "argument")) {
                    r.stca = Some(structural_accuracy(pred, b, a) as f64);
                }
            }
            let mode = opts.ged_mode.unwrap_or(
                if pred.nodes.len().max(gold.nodes.len()) <= EXACT_GED_MAX_NODES { GedMode::Exact } else { GedMode::Greedy },
            );
            r.ged = Some(graph_edit_distance(pred, gold, mode).map_err(|source| EvalError::Ged { index, source })?);
            r.ged_mode = Some(mode);
        }
        Task::Semgraph => {
            let (t, g) = triple_f1(pred, gold);
            r.t_f1 = Some(t);
            r.g_f1 = Some(g as f64);
        }
    }
    Ok(r)
}

/// Macro average of per-instance reports; error counts are summed.
pub fn macro_average(reports: &[EvalReport]) -> EvalReport {
    fn avg(reports: &[EvalReport], f: impl Fn(&EvalReport) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = reports.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
    let mut out = EvalReport {
        task: reports.first().and_then(|r| r.task),
        instances: reports.iter().map(|r| r.instances).sum(),
        c_f1: avg(reports, |r| r.c_f1),
        c_precision: avg(reports, |r| r.c_precision),
        c_recall: avg(reports, |r| r.c_recall),
        r100_f1: avg(reports, |r| r.r100_f1),
        r50_f1: avg(reports, |r| r.r50_f1),
        edge_f1: avg(reports, |r| r.edge_f1),
        t_f1: avg(reports, |r| r.t_f1),
        g_f1: avg(reports, |r| r.g_f1),
        stca: avg(reports, |r| r.stca),
        ged: avg(reports, |r| r.ged),
        ged_mode: None,
        seca: None,
        g_bs: None,
        error_counts: ErrorCounts::default(),
    };
    for r in reports {
        out.error_counts.add(&r.error_counts);
        out.ged_mode = match (out.ged_mode, r.ged_mode) {
            (Some(GedMode::Greedy), _) | (_, Some(GedMode::Greedy)) => Some(GedMode::Greedy),
            (a, b) => a.or(b),
        };
    }
    out
}

/// Evaluates aligned prediction/gold lists and macro-averages the result.
pub fn evaluate_corpus(
    preds: &[Graph],
    golds: &[Graph],
    task: Task,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::CountMismatch { pred: preds.len(), gold: golds.len() });
    }
    let reports = preds
        .par_iter()
        .zip(golds)
        .enumerate()
        .map(|(i, (p, g))| evaluate_instance(i, p, g, task, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(macro_average(&reports))
}
