//! Depth-first branch-and-bound over binary variables, using the LP relaxation
//! from `microlp` as the bound.

use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{SolveStats, SolverError, WEIGHT_EPS};

const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn le(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, sense: Sense::Le, rhs }
    }

    pub fn ge(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, sense: Sense::Ge, rhs }
    }
}

/// A 0-1 program: minimize `objective . v` subject to `rows`, `v` binary.
///
/// Variables below `primary` are branched on first. Auxiliary variables
/// (index >= `primary`) are only branched on when the separator asks for it.
#[derive(Debug, Clone, Default)]
pub(crate) struct Model {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub primary: usize,
}

impl Model {
    pub fn add_var(&mut self, obj: f64) -> usize {
        self.objective.push(obj);
        self.objective.len() - 1
    }

    /// Marks every variable added so far as primary.
    pub fn seal_primary(&mut self) {
        self.primary = self.objective.len();
    }
}

/// What to do with a relaxation whose primary variables are integral.
pub(crate) enum Verdict {
    Accept,
    Cut(Vec<Row>),
    BranchAuxiliary,
}

pub(crate) struct Budget {
    pub deadline: Option<Instant>,
    pub node_limit: Option<usize>,
}

pub(crate) struct Outcome {
    /// Best integral assignment found, each entry 0 or 1.
    pub values: Vec<bool>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective: f64,
    pub stats: SolveStats,
    /// False when the budget ran out before the search tree was exhausted.
    pub complete: bool,
}

enum Relaxation {
    Infeasible,
    Solved { objective: f64, values: Vec<f64> },
}

fn relax(model: &Model, cuts: &[Row], fixed: &[Option<bool>]) -> Result<Relaxation, SolverError> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = model
        .objective
        .iter()
        .zip(fixed)
        .map(|(&c, f)| {
            let bounds = match f {
                Some(true) => (1.0, 1.0),
                Some(false) => (0.0, 0.0),
                None => (0.0, 1.0),
            };
            lp.add_var(c, bounds)
        })
        .collect();
    for row in model.rows.iter().chain(cuts) {
        let expr: Vec<_> = row.terms.iter().map(|&(i, c)| (vars[i], c)).collect();
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
        };
        lp.add_constraint(expr, op, row.rhs);
    }
    match lp.solve() {
        Ok(outcome) => {
            let sol = outcome.into_solution().map_err(|_| SolverError::Lp("relaxation interrupted".into()))?;
            let values = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
            Ok(Relaxation::Solved { objective: sol.objective(), values })
        }
        Err(microlp::Error::Infeasible) => Ok(Relaxation::Infeasible),
        Err(e) => Err(SolverError::Lp(format!("{e:?}"))),
    }
}

fn most_fractional(values: &[f64], offset: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate().map(|(i, v)| (i + offset, v)) {
        let frac = (v - v.round()).abs();
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        let dist = (v - 0.5).abs();
        if best.map_or(true, |(_, d)| dist < d - 1e-12) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i)
}

/// Runs the search. `separate` sees every relaxation whose primary variables
/// are integral (rounded to booleans) and either accepts it, returns violated
/// rows for the global cut pool, or asks to branch on auxiliary variables.
/// The all-zero assignment must be feasible; it seeds the incumbent.
pub(crate) fn branch_and_bound(
    model: &Model,
    budget: &Budget,
    mut separate: impl FnMut(&[bool]) -> Verdict,
) -> Result<Outcome, SolverError> {
    let n = model.objective.len();
    let mut stats = SolveStats::default();
    let mut cuts: Vec<Row> = Vec::new();
    let mut best_values = vec![false; n];
    let mut best_obj = 0.0;
    let mut stack: Vec<Vec<Option<bool>>> = vec![vec![None; n]];
    let mut complete = true;

    while let Some(fixed) = stack.pop() {
        let out_of_time = budget.deadline.is_some_and(|d| Instant::now() >= d);
        let out_of_nodes = budget.node_limit.is_some_and(|l| stats.bb_nodes >= l);
        if out_of_time || out_of_nodes {
            complete = false;
            break;
        }
        stats.bb_nodes += 1;
        loop {
            stats.lp_solves += 1;
            let (obj, values) = match relax(model, &cuts, &fixed)? {
                Relaxation::Infeasible => break,
                Relaxation::Solved { objective, values } => (objective, values),
            };
            if obj >= best_obj - WEIGHT_EPS {
                break;
            }
            let rounded: Vec<bool> = values.iter().map(|&v| v > 0.5).collect();
            let mut branch_on = most_fractional(&values[..model.primary], 0);
            if branch_on.is_none() {
                match separate(&rounded[..model.primary]) {
                    Verdict::Accept => {}
                    Verdict::Cut(new_cuts) => {
                        stats.cuts += new_cuts.len();
                        cuts.extend(new_cuts);
                        continue;
                    }
                    Verdict::BranchAuxiliary => {
                        branch_on = most_fractional(&values[model.primary..], model.primary);
                    }
                }
            }
            if let Some(i) = branch_on {
                let (first, second) = if values[i] >= 0.5 { (true, false) } else { (false, true) };
                let mut later = fixed.clone();
                later[i] = Some(second);
                stack.push(later);
                let mut sooner = fixed;
                sooner[i] = Some(first);
                stack.push(sooner);
                break;
            }
            // Integral primaries, accepted (or auxiliaries already integral,
            // which the caller's formulation makes feasible).
            best_obj = rounded.iter().zip(&model.objective).filter(|(&on, _)| on).map(|(_, c)| c).sum();
            best_values = rounded;
            break;
        }
    }
    Ok(Outcome { values: best_values, objective: best_obj, stats, complete })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unbounded_budget() -> Budget {
        Budget { deadline: None, node_limit: None }
    }

    #[test]
    fn knapsack_like_branching() {
        // min -3a -2b -2c s.t. 2a + 2b + 2c <= 3: the relaxation takes a and half of b.
        let mut m = Model::default();
        let a = m.add_var(-3.0);
        let b = m.add_var(-2.0);
        let c = m.add_var(-2.0);
        m.rows.push(Row::le(vec![(a, 2.0), (b, 2.0), (c, 2.0)], 3.0));
        m.seal_primary();
        let out = branch_and_bound(&m, &unbounded_budget(), |_| Verdict::Accept).unwrap();
        assert!(out.complete);
        assert!((out.objective + 3.0).abs() < 1e-9);
        assert_eq!(out.values, vec![true, false, false]);
        assert!(out.stats.bb_nodes > 1);
    }

    #[test]
    fn separation_adds_cuts() {
        // Both a and b are attractive, but the separator forbids taking both.
        let mut m = Model::default();
        let a = m.add_var(-1.0);
        let b = m.add_var(-2.0);
        m.seal_primary();
        let out = branch_and_bound(&m, &unbounded_budget(), |v| {
            if v[a] && v[b] {
                Verdict::Cut(vec![Row::le(vec![(a, 1.0), (b, 1.0)], 1.0)])
            } else {
                Verdict::Accept
            }
        })
        .unwrap();
        assert_eq!(out.values, vec![false, true]);
        assert_eq!(out.stats.cuts, 1);
    }

    #[test]
    fn node_limit_marks_incomplete() {
        let mut m = Model::default();
        let a = m.add_var(-1.0);
        let b = m.add_var(-1.0);
        m.rows.push(Row::le(vec![(a, 2.0), (b, 2.0)], 1.0));
        m.seal_primary();
        let out = branch_and_bound(&m, &Budget { deadline: None, node_limit: Some(1) }, |_| Verdict::Accept).unwrap();
        assert!(!out.complete);
        assert_eq!(out.objective, 0.0);
    }
}
