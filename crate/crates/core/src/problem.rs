//! Instances, schedules, feasibility and the energy objective.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyFunction;

/// Slack accepted when checking real-valued start times.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: usize,
    pub p: i64,
    pub r: i64,
    pub d: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_proc: Option<f64>,
}

impl Job {
    pub fn new(id: usize, p: i64, r: i64, d: i64) -> Self {
        Self {
            id,
            p,
            r,
            d,
            e_proc: None,
        }
    }

    /// Latest feasible start time.
    pub fn latest_start(&self) -> i64 {
        self.d - self.p
    }
}

/// Generation metadata; not used by any solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Machine assignment drawn while generating release times (1-based).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_assignment: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub machines: usize,
    pub c_onoff: f64,
    pub energy_function: EnergyFunction,
    pub jobs: Vec<Job>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<InstanceMeta>,
}

impl Instance {
    pub fn new(machines: usize, c_onoff: f64, energy_function: EnergyFunction, jobs: Vec<Job>) -> Self {
        Self {
            machines,
            c_onoff,
            energy_function,
            jobs,
            meta: None,
        }
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    /// Scheduling horizon: the latest deadline (0 without jobs).
    pub fn horizon(&self) -> i64 {
        self.jobs.iter().map(|j| j.d).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceIssue {
    WindowTooSmall { job: usize },
    NegativeTime { job: usize },
    DuplicateId { id: usize },
    NonContiguousIds,
    NoMachines,
    NonPositiveOnOff,
    MalformedEnergyFunction(String),
}

impl fmt::Display for InstanceIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceIssue::WindowTooSmall { job } => write!(f, "job {job}: window too small (r + p > d)"),
            InstanceIssue::NegativeTime { job } => write!(f, "job {job}: negative time parameter"),
            InstanceIssue::DuplicateId { id } => write!(f, "duplicate job id {id}"),
            InstanceIssue::NonContiguousIds => write!(f, "job ids must be 1..n in order"),
            InstanceIssue::NoMachines => write!(f, "machine count must be positive"),
            InstanceIssue::NonPositiveOnOff => write!(f, "c_onoff must be positive"),
            InstanceIssue::MalformedEnergyFunction(m) => write!(f, "malformed energy function: {m}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub violations: Vec<InstanceIssue>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collects everything wrong with an instance; never fails.
pub fn validate_instance(inst: &Instance) -> Diagnostics {
    let mut diag = Diagnostics::default();
    if inst.machines == 0 {
        diag.violations.push(InstanceIssue::NoMachines);
    }
    if !(inst.c_onoff > 0.0) {
        diag.violations.push(InstanceIssue::NonPositiveOnOff);
    }
    if let Err(e) = inst.energy_function.check() {
        diag.violations
            .push(InstanceIssue::MalformedEnergyFunction(e.to_string()));
    }
    let mut seen = HashSet::new();
    for j in &inst.jobs {
        if !seen.insert(j.id) {
            diag.violations.push(InstanceIssue::DuplicateId { id: j.id });
        }
        if j.p < 0 || j.r < 0 || j.d < 0 {
            diag.violations.push(InstanceIssue::NegativeTime { job: j.id });
        } else if j.r + j.p > j.d {
            diag.violations.push(InstanceIssue::WindowTooSmall { job: j.id });
        }
        if j.p == 0 {
            diag.warnings.push(format!("job {} has zero processing time", j.id));
        }
        if j.e_proc.is_some_and(|e| !(e >= 0.0)) {
            diag.warnings.push(format!("job {} has negative processing energy", j.id));
        }
    }
    if inst.jobs.iter().enumerate().any(|(i, j)| j.id != i + 1) {
        diag.violations.push(InstanceIssue::NonContiguousIds);
    }
    diag
}

/// Assignment (1-based machine per job) and start times, both in job order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub assignment: Vec<usize>,
    pub start: Vec<f64>,
}

impl Solution {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("solution shape mismatch: {0}")]
pub struct ShapeError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleViolation {
    BadMachine { job: usize, machine: usize },
    BeforeRelease { job: usize },
    AfterDeadline { job: usize },
    Overlap { machine: usize, first: usize, second: usize },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleViolation::BadMachine { job, machine } => {
                write!(f, "job {job} assigned to nonexistent machine {machine}")
            }
            ScheduleViolation::BeforeRelease { job } => write!(f, "job {job} starts before its release"),
            ScheduleViolation::AfterDeadline { job } => write!(f, "job {job} ends after its deadline"),
            ScheduleViolation::Overlap { machine, first, second } => {
                write!(f, "jobs {first} and {second} overlap on machine {machine}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("infeasible solution: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Infeasible(Vec<ScheduleViolation>),
}

fn check_shape(inst: &Instance, sol: &Solution) -> Result<(), ShapeError> {
    let n = inst.n();
    if sol.assignment.len() != n || sol.start.len() != n {
        return Err(ShapeError(format!(
            "{n} jobs but {} assignments and {} start times",
            sol.assignment.len(),
            sol.start.len()
        )));
    }
    if let Some(s) = sol.start.iter().find(|s| !s.is_finite()) {
        return Err(ShapeError(format!("non-finite start time {s}")));
    }
    Ok(())
}

/// Job indices per machine (0-based machine), sorted by start then id.
fn machine_orders(inst: &Instance, sol: &Solution) -> Vec<Vec<usize>> {
    let mut orders = vec![Vec::new(); inst.machines];
    for (j, &k) in sol.assignment.iter().enumerate() {
        if (1..=inst.machines).contains(&k) {
            orders[k - 1].push(j);
        }
    }
    for o in &mut orders {
        o.sort_by(|&a, &b| {
            sol.start[a]
                .total_cmp(&sol.start[b])
                .then(inst.jobs[a].id.cmp(&inst.jobs[b].id))
        });
    }
    orders
}

/// Window containment and per-machine non-overlap. An empty list means feasible.
pub fn check_feasibility(inst: &Instance, sol: &Solution) -> Result<Vec<ScheduleViolation>, ShapeError> {
    check_shape(inst, sol)?;
    let mut out = Vec::new();
    for (j, job) in inst.jobs.iter().enumerate() {
        let k = sol.assignment[j];
        if !(1..=inst.machines).contains(&k) {
            out.push(ScheduleViolation::BadMachine { job: job.id, machine: k });
        }
        if sol.start[j] < job.r as f64 - FEAS_TOL {
            out.push(ScheduleViolation::BeforeRelease { job: job.id });
        }
        if sol.start[j] + job.p as f64 > job.d as f64 + FEAS_TOL {
            out.push(ScheduleViolation::AfterDeadline { job: job.id });
        }
    }
    for (k, order) in machine_orders(inst, sol).iter().enumerate() {
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if sol.start[b] < sol.start[a] + inst.jobs[a].p as f64 - FEAS_TOL {
                out.push(ScheduleViolation::Overlap {
                    machine: k + 1,
                    first: inst.jobs[a].id,
                    second: inst.jobs[b].id,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineSchedule {
    pub machine: usize,
    /// Job ids in processing order.
    pub jobs: Vec<usize>,
    /// Idle period lengths between consecutive jobs.
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSolution {
    pub solution: Solution,
    pub idle_energy: f64,
    pub onoff_energy: f64,
    pub processing_energy: f64,
    pub total: f64,
    /// Immediate predecessor id of each job (job order), `None` for first jobs.
    pub pred: Vec<Option<usize>>,
    pub machines: Vec<MachineSchedule>,
}

impl EvaluatedSolution {
    /// The part of the objective the optimization models see.
    pub fn idle_plus_onoff(&self) -> f64 {
        self.idle_energy + self.onoff_energy
    }
}

/// Total energy of a feasible schedule: processing + idle + on/off.
///
/// Idle periods before the first and after the last job of a machine cost
/// nothing; every machine with at least one job pays `c_onoff` once.
pub fn evaluate(inst: &Instance, sol: &Solution) -> Result<EvaluatedSolution, EvaluationError> {
    let violations = check_feasibility(inst, sol)?;
    if !violations.is_empty() {
        return Err(EvaluationError::Infeasible(violations));
    }
    let f = &inst.energy_function;
    let mut pred = vec![None; inst.n()];
    let mut idle = 0.0;
    let mut onoff = 0.0;
    let mut machines = Vec::new();
    for (k, order) in machine_orders(inst, sol).iter().enumerate() {
        if order.is_empty() {
            continue;
        }
        onoff += inst.c_onoff;
        let mut gaps = Vec::with_capacity(order.len().saturating_sub(1));
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            pred[b] = Some(inst.jobs[a].id);
            let gap = sol.start[b] - sol.start[a] - inst.jobs[a].p as f64;
            // Feasibility already bounds the gap from below by -FEAS_TOL.
            idle += f
                .evaluate_snapped(gap, FEAS_TOL)
                .expect("gap is non-negative within tolerance");
            gaps.push(gap.max(0.0));
        }
        machines.push(MachineSchedule {
            machine: k + 1,
            jobs: order.iter().map(|&j| inst.jobs[j].id).collect(),
            gaps,
        });
    }
    let processing: f64 = inst.jobs.iter().filter_map(|j| j.e_proc).sum();
    Ok(EvaluatedSolution {
        solution: sol.clone(),
        idle_energy: idle,
        onoff_energy: onoff,
        processing_energy: processing,
        total: processing + idle + onoff,
        pred,
        machines,
    })
}
