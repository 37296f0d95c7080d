//! MILP formulations as a solver-agnostic model IR.

pub mod ir;
pub mod lp;
pub mod position;
pub mod pwl;
pub mod relative;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Instance, Solution};

pub use ir::{Annotation, Constraint, LinExpr, ModelIR, Relation, VarId, VarKind, Variable};
pub use lp::{emit_lp, write_lp, LpNames};
pub use position::{build_position_based, PositionModel, PositionOptions, TwoModeParams};
pub use pwl::{linearize_pwl, PwlMethod, PwlTerm};
pub use relative::{build_relative_order, RelativeOptions, RelativeOrderModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unsupported energy function: {0}")]
    Unsupported(String),
    #[error("name collision after sanitization: {0} and {1} both become {2}")]
    NameCollision(String, String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How big-M constants are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BigMMode {
    /// `M = H` everywhere.
    #[default]
    Horizon,
    /// Per job pair, the largest value the deactivated left-hand side can
    /// take given the time windows, capped at `H`.
    Tightened,
}

/// The horizon `H`, used as the default big-M.
pub fn big_m(inst: &Instance) -> f64 {
    inst.horizon() as f64
}

/// Tightened constant for the pair `(j, j2)`: `min(H, d_j2 - r_j)`, floored at 0.
pub fn big_m_pair(inst: &Instance, j: usize, j2: usize) -> f64 {
    let v = inst.jobs[j2 - 1].d - inst.jobs[j - 1].r;
    (v.max(0) as f64).min(big_m(inst))
}

/// Rounds solver output that is within `1e-6` of an integer.
pub(crate) fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-6 {
        r
    } else {
        v
    }
}

fn check_job_ids(inst: &Instance) -> Result<(), ModelError> {
    match inst.jobs.iter().enumerate().find(|(i, j)| j.id != i + 1) {
        Some((i, j)) => Err(ModelError::Invalid(format!(
            "job at position {} has id {}; ids must be 1..n in order",
            i + 1,
            j.id
        ))),
        None => Ok(()),
    }
}

/// Maps solver values back to a schedule using the variable annotations of
/// either formulation. Returns `None` if some job is not assigned.
pub fn decode_solution(ir: &ModelIR, inst: &Instance, values: &[f64]) -> Option<Solution> {
    let n = inst.n();
    let mut assignment = vec![0; n];
    let mut start = vec![f64::NAN; n];
    let mut completion = std::collections::HashMap::new();
    let mut positions = Vec::new();
    for (v, var) in ir.variables.iter().enumerate() {
        let Some(ann) = ir.annotations.get(&var.name) else { continue };
        let val = values[v];
        match (ann.role.as_str(), ann.indices.as_slice()) {
            ("assign", &[j, k]) if val > 0.5 => assignment[j - 1] = k,
            ("start", &[j]) => start[j - 1] = snap(val),
            ("position", &[i, l, k]) if val > 0.5 => {
                assignment[i - 1] = k;
                positions.push((i, l, k));
            }
            ("completion", &[l, k]) => {
                completion.insert((l, k), snap(val));
            }
            _ => {}
        }
    }
    for (i, l, k) in positions {
        start[i - 1] = completion.get(&(l, k))? - inst.jobs[i - 1].p as f64;
    }
    if assignment.iter().any(|&k| k == 0) || start.iter().any(|s| s.is_nan()) {
        return None;
    }
    Some(Solution { assignment, start })
}
