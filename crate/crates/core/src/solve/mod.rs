//! Exact solving: MILP models through an external solver, or instances
//! through the built-in enumeration/DP oracle.

pub mod external;
pub mod oracle;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{
    build_position_based, build_relative_order, decode_solution, BigMMode, ModelError, ModelIR, PositionOptions,
    PwlMethod, RelativeOptions, TwoModeParams,
};
use crate::problem::{check_feasibility, evaluate, Instance, Solution, FEAS_TOL};

pub use external::{solve_external, ExternalResult, SolverCommand};
pub use oracle::{brute_force, dp_timing, OracleConfig, OracleError, OracleMethod, Timing};

/// Absolute tolerance on objective values.
pub const OBJ_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Time limit hit with an incumbent.
    FeasibleTimeout,
    Infeasible,
    /// Time limit hit without an incumbent.
    UnknownTimeout,
    Error,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeout => "feasible_timeout",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::UnknownTimeout => "unknown_timeout",
            SolveStatus::Error => "error",
        }
    }

    pub fn is_timeout(self) -> bool {
        matches!(self, SolveStatus::FeasibleTimeout | SolveStatus::UnknownTimeout)
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Optimal => 0,
            SolveStatus::FeasibleTimeout => 10,
            SolveStatus::Infeasible => 11,
            SolveStatus::UnknownTimeout => 12,
            SolveStatus::Error => 1,
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "feasible_timeout" => SolveStatus::FeasibleTimeout,
            "infeasible" => SolveStatus::Infeasible,
            "unknown_timeout" => SolveStatus::UnknownTimeout,
            "error" => SolveStatus::Error,
            _ => return Err(format!("unknown status {s:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub runtime_s: f64,
    pub solution: Option<Solution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SolveResult {
    pub fn error(msg: impl Into<String>, runtime_s: f64) -> Self {
        Self {
            status: SolveStatus::Error,
            objective: None,
            bound: None,
            gap: None,
            runtime_s,
            solution: None,
            message: Some(msg.into()),
        }
    }

    pub fn has_incumbent(&self) -> bool {
        self.objective.is_some()
    }
}

/// `(objective - bound) / objective`; zero when both agree, absent when the
/// ratio is undefined.
pub fn relative_gap(objective: f64, bound: f64) -> Option<f64> {
    if (objective - bound).abs() <= OBJ_TOL {
        Some(0.0)
    } else if objective > 0.0 {
        Some(((objective - bound) / objective).max(0.0))
    } else {
        None
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("cannot parse solver output: {0}")]
    Parse(String),
    #[error("no external solver found; set IDLE_ENERGY_SOLVER or pass a solver command")]
    NoSolver,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Relative,
    Position,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Relative => "relative",
            ModelKind::Position => "position",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    External,
    Oracle,
}

/// Everything `solve_instance` needs besides the instance.
#[derive(Debug, Clone)]
pub struct SolveRequest {
    pub model: ModelKind,
    pub backend: Backend,
    pub symmetry: bool,
    /// Relative-order model only.
    pub horizon_fill: bool,
    pub big_m: BigMMode,
    pub pwl: PwlMethod,
    pub time_limit_s: f64,
    pub solver: Option<SolverCommand>,
    pub oracle: OracleConfig,
    pub work_dir: Option<PathBuf>,
}

impl Default for SolveRequest {
    fn default() -> Self {
        Self {
            model: ModelKind::Relative,
            backend: Backend::External,
            symmetry: true,
            horizon_fill: true,
            big_m: BigMMode::Horizon,
            pwl: PwlMethod::SegmentBinary,
            time_limit_s: 60.0,
            solver: None,
            oracle: OracleConfig::default(),
            work_dir: None,
        }
    }
}

/// Builds the requested formulation.
pub fn build_model(inst: &Instance, req: &SolveRequest) -> Result<ModelIR, ModelError> {
    Ok(match req.model {
        ModelKind::Relative => {
            let opts = RelativeOptions {
                symmetry: req.symmetry,
                horizon_fill: req.horizon_fill,
                big_m: req.big_m,
                pwl: req.pwl,
            };
            build_relative_order(inst, opts)?.ir
        }
        ModelKind::Position => {
            let params = TwoModeParams::from_function(&inst.energy_function)?;
            build_position_based(inst, params, PositionOptions { symmetry: req.symmetry })?.ir
        }
    })
}

/// Solves one instance with the requested backend. Solver-side failures are
/// reported as `SolveStatus::Error` rather than as `Err`.
pub fn solve_instance(inst: &Instance, req: &SolveRequest) -> Result<SolveResult, SolveError> {
    match req.backend {
        Backend::Oracle => Ok(brute_force(inst, &req.oracle)?),
        Backend::External => {
            let ir = build_model(inst, req)?;
            let cmd = match &req.solver {
                Some(c) => c.clone(),
                None => SolverCommand::detect().ok_or(SolveError::NoSolver)?,
            };
            let started = Instant::now();
            let raw = match solve_external(&ir, &cmd, req.time_limit_s, req.work_dir.as_deref()) {
                Ok(r) => r,
                Err(e) => return Ok(SolveResult::error(e.to_string(), started.elapsed().as_secs_f64())),
            };
            Ok(finish_external(inst, &ir, raw))
        }
    }
}

fn finish_external(inst: &Instance, ir: &ModelIR, raw: ExternalResult) -> SolveResult {
    let mut res = SolveResult {
        status: raw.status,
        objective: raw.objective,
        bound: raw.bound,
        gap: None,
        runtime_s: raw.runtime_s,
        solution: None,
        message: None,
    };
    if let Some(values) = &raw.values {
        match decode_solution(ir, inst, values) {
            Some(sol) => match check_feasibility(inst, &sol) {
                Ok(v) if v.is_empty() => res.solution = Some(sol),
                Ok(v) => {
                    res.status = SolveStatus::Error;
                    res.message = Some(format!("decoded schedule infeasible: {}", v[0]));
                }
                Err(e) => {
                    res.status = SolveStatus::Error;
                    res.message = Some(e.to_string());
                }
            },
            None if res.objective.is_some() => {
                res.status = SolveStatus::Error;
                res.message = Some("solver values do not describe a schedule".into());
            }
            None => {}
        }
    }
    if res.status == SolveStatus::Optimal && res.bound.is_none() {
        res.bound = res.objective;
    }
    res.gap = match (res.objective, res.bound) {
        (Some(o), Some(b)) => relative_gap(o, b),
        _ => None,
    };
    res
}

/// `idle + on/off` energy of a stored solution, for cross-checking reported
/// objectives.
pub fn recompute_objective(inst: &Instance, sol: &Solution) -> Option<f64> {
    evaluate(inst, sol).ok().map(|e| e.idle_plus_onoff())
}

/// Whether two objective values agree within [`OBJ_TOL`].
pub fn objectives_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= OBJ_TOL.max(FEAS_TOL)
}
