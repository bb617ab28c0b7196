//! Plain-text dump of a selection problem in the CPLEX LP style, for
//! inspection with external tools.

use std::fmt::Write;

use super::bnb::Sense;
use super::{closure, SolverError, WeightedSelectionProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Full path-indicator model.
    TransitiveClosure,
    /// Coupling rows only; cycle cuts are generated during the solve.
    Relaxed,
}

pub fn to_lp_format(problem: &WeightedSelectionProblem, formulation: Formulation) -> Result<String, SolverError> {
    let mut p = problem.clone();
    if formulation == Formulation::Relaxed {
        p.require_dag = false;
    }
    let layout = closure::build(&p)?;
    let mut names: Vec<String> = Vec::with_capacity(layout.model.objective.len());
    names.extend(layout.edges.iter().map(|(h, t)| format!("x_{}_{}", h.0, t.0)));
    names.extend(layout.nodes.iter().map(|n| format!("y_{}", n.0)));
    names.resize(layout.model.objective.len(), String::new());
    for (&(h, t), &i) in &layout.paths {
        names[i] = format!("b_{}_{}", h.0, t.0);
    }

    let term = |coef: f64, name: &str, first: bool| -> String {
        let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
        // Rounded so that e.g. 1 - 0.8 prints as 0.2.
        let mag = (coef.abs() * 1e12).round() / 1e12;
        let lead = if first && sign.is_empty() { String::new() } else { format!("{sign} ") };
        if (mag - 1.0).abs() < 1e-15 {
            format!("{lead}{name}")
        } else {
            format!("{lead}{mag} {name}")
        }
    };

    let mut out = String::new();
    out.push_str("\\ graph selection problem\nMinimize\n obj:");
    let mut first = true;
    for (i, &c) in layout.model.objective.iter().enumerate() {
        if c != 0.0 {
            write!(out, " {}", term(c, &names[i], first)).unwrap();
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (r, row) in layout.model.rows.iter().enumerate() {
        write!(out, " c{r}:").unwrap();
        for (k, &(i, c)) in row.terms.iter().enumerate() {
            write!(out, " {}", term(c, &names[i], k == 0)).unwrap();
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        writeln!(out, " {op} {}", row.rhs).unwrap();
    }
    out.push_str("Binary\n");
    for name in &names {
        writeln!(out, " {name}").unwrap();
    }
    out.push_str("End\n");
    Ok(out)
}
