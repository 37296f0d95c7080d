//! Experiment runner: generate a seeded suite, solve every instance with
//! every configured model, write one CSV row per solve, aggregate.

pub mod aggregate;
pub mod plot;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyFunction;
use crate::generator::{generate_suite, GenError, SuiteGrid, SuiteInstance};
use crate::milp::{BigMMode, PwlMethod};
use crate::solve::{
    solve_instance, Backend, ModelKind, OracleConfig, SolveError, SolveRequest, SolveResult, SolveStatus,
    SolverCommand,
};

pub use aggregate::{
    aggregate, aggregate_to_csv, compare_models, render_table, table_from_rows, AggregateRow, Comparison, ConfigKey,
    TableShape,
};
pub use plot::{emit_energy_curve, emit_plot_data, PlotKind};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Energy(#[from] crate::energy::EnergyError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("instance sets differ: {0}")]
    Mismatch(String),
    #[error("unknown plot kind {0:?}")]
    UnknownPlot(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inline function definition or a path to an energy-function JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergySource {
    File { file: PathBuf },
    Inline(EnergyFunction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Ignored by the oracle backend.
    #[serde(default = "relative")]
    pub model: ModelKind,
    #[serde(default = "external")]
    pub backend: Backend,
    #[serde(default)]
    pub symmetry: bool,
    #[serde(default)]
    pub horizon_fill: bool,
}

fn relative() -> ModelKind {
    ModelKind::Relative
}

fn external() -> Backend {
    Backend::External
}

impl RunConfig {
    pub fn key(&self) -> ConfigKey {
        match self.backend {
            Backend::Oracle => ConfigKey {
                model: "oracle".into(),
                toggles: "none".into(),
            },
            Backend::External => ConfigKey {
                model: self.model.as_str().into(),
                toggles: toggles_label(self.symmetry, self.horizon_fill && self.model == ModelKind::Relative),
            },
        }
    }
}

pub fn toggles_label(symmetry: bool, horizon_fill: bool) -> String {
    match (symmetry, horizon_fill) {
        (true, true) => "sym+fill",
        (true, false) => "sym",
        (false, true) => "fill",
        (false, false) => "none",
    }
    .into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub results_csv: PathBuf,
    #[serde(default)]
    pub aggregate_csv: Option<PathBuf>,
    #[serde(default)]
    pub table_md: Option<PathBuf>,
    #[serde(default)]
    pub table_shape: TableShape,
}

/// A benchmark run, usually read from JSON. Relative paths are resolved
/// against the directory of the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub suite: SuiteGrid,
    pub energy_function: EnergySource,
    /// Defaults to the final-piece intercept of the energy function.
    #[serde(default)]
    pub c_onoff: Option<f64>,
    pub runs: Vec<RunConfig>,
    pub time_limit_s: f64,
    /// `cbc`, `highspy`, or a command template; detected when absent.
    #[serde(default)]
    pub solver_cmd: Option<String>,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub big_m: BigMMode,
    #[serde(default)]
    pub pwl: PwlMethod,
    pub output: OutputPaths,
    /// Directory for instance and solution JSON files.
    #[serde(default)]
    pub solutions_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let mut spec: ExperimentSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.resolve_paths(base);
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let EnergySource::File { file } = &mut self.energy_function {
            fix(file);
        }
        fix(&mut self.output.results_csv);
        for p in [&mut self.output.aggregate_csv, &mut self.output.table_md, &mut self.solutions_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs.is_empty() {
            return Err(BenchError::Spec("at least one run configuration is required".into()));
        }
        if !(self.time_limit_s > 0.0) {
            return Err(BenchError::Spec("time limit must be positive".into()));
        }
        if self.workers == 0 {
            return Err(BenchError::Spec("workers must be at least 1".into()));
        }
        let mut keys: Vec<ConfigKey> = self.runs.iter().map(|r| r.key()).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(BenchError::Spec("run configurations repeat".into()));
        }
        Ok(())
    }

    pub fn energy_function(&self) -> Result<EnergyFunction, BenchError> {
        match &self.energy_function {
            EnergySource::Inline(f) => Ok(f.clone()),
            EnergySource::File { file } => Ok(serde_json::from_str(&std::fs::read_to_string(file)?)?),
        }
    }
}

/// One solve; the CSV header is fixed by the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub model: String,
    pub toggles: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub runtime_s: f64,
}

pub const RESULTS_HEADER: &str = "instance_id,n,m,alpha,gamma,model,toggles,status,objective,bound,gap,runtime_s";

impl ResultRow {
    pub fn key(&self) -> ConfigKey {
        ConfigKey {
            model: self.model.clone(),
            toggles: self.toggles.clone(),
        }
    }
}

impl fmt::Display for ResultRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}[{}] {} {:.3}s",
            self.instance_id, self.model, self.toggles, self.status, self.runtime_s
        )
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, results_to_string(rows)?)?;
    Ok(())
}

pub fn results_to_string(rows: &[ResultRow]) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8");
    Ok(format!("{RESULTS_HEADER}\n{body}"))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    parse_results(&std::fs::read_to_string(path)?)
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>, BenchError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(BenchError::Spec(format!("unexpected results header {:?}", header.join(","))));
    }
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub instances: Vec<SuiteInstance>,
    pub rows: Vec<ResultRow>,
    pub aggregate: Vec<AggregateRow>,
    pub table: String,
}

fn solution_file(dir: &Path, instance_id: &str, key: &ConfigKey) -> PathBuf {
    dir.join(format!("{instance_id}__{}__{}.json", key.model, key.toggles))
}

fn instance_file(dir: &Path, instance_id: &str) -> PathBuf {
    dir.join("instances").join(format!("{instance_id}.json"))
}

/// Generates the suite, solves it with every configuration and writes the
/// configured outputs. Per-solve failures become `error` rows.
pub fn run_experiment(spec: &ExperimentSpec, progress: &(dyn Fn(&ResultRow) + Sync)) -> Result<ExperimentOutput, BenchError> {
    spec.validate()?;
    let f = spec.energy_function()?;
    let c_onoff = spec.c_onoff.unwrap_or_else(|| f.final_intercept());
    let suite = generate_suite(&spec.suite, &f, c_onoff)?;
    let solver = match &spec.solver_cmd {
        Some(s) => Some(SolverCommand::parse(s)?),
        None if spec.runs.iter().any(|r| r.backend == Backend::External) => {
            Some(SolverCommand::detect().ok_or(SolveError::NoSolver)?)
        }
        None => None,
    };
    if let Some(dir) = &spec.solutions_dir {
        std::fs::create_dir_all(dir.join("instances"))?;
        for si in &suite {
            std::fs::write(instance_file(dir, &si.id), si.instance.to_json())?;
        }
    }

    let tasks: Vec<(usize, usize)> = (0..suite.len())
        .flat_map(|i| (0..spec.runs.len()).map(move |r| (i, r)))
        .collect();
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, ResultRow)>> = Mutex::new(Vec::with_capacity(tasks.len()));
    let work = || -> Result<(), BenchError> {
        loop {
            let t = next.fetch_add(1, Ordering::Relaxed);
            let Some(&(i, r)) = tasks.get(t) else { return Ok(()) };
            let si = &suite[i];
            let run = spec.runs[r];
            let req = SolveRequest {
                model: run.model,
                backend: run.backend,
                symmetry: run.symmetry,
                horizon_fill: run.horizon_fill,
                big_m: spec.big_m,
                pwl: spec.pwl,
                time_limit_s: spec.time_limit_s,
                solver: solver.clone(),
                oracle: spec.oracle,
                work_dir: None,
            };
            let started = Instant::now();
            let res = solve_instance(&si.instance, &req)
                .unwrap_or_else(|e| SolveResult::error(e.to_string(), started.elapsed().as_secs_f64()));
            let key = run.key();
            if let (Some(dir), Some(sol)) = (&spec.solutions_dir, &res.solution) {
                std::fs::write(solution_file(dir, &si.id, &key), sol.to_json())?;
            }
            let row = ResultRow {
                instance_id: si.id.clone(),
                n: si.cell.n,
                m: si.cell.m,
                alpha: si.cell.alpha,
                gamma: si.cell.gamma,
                model: key.model,
                toggles: key.toggles,
                status: res.status,
                objective: res.objective,
                bound: res.bound,
                gap: res.gap,
                runtime_s: res.runtime_s,
            };
            progress(&row);
            done.lock().expect("no panics while holding the lock").push((t, row));
        }
    };
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..spec.workers.min(tasks.len()).max(1)).map(|_| s.spawn(work)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<()>, BenchError>>()
    })?;

    let mut done = done.into_inner().expect("workers finished");
    done.sort_by_key(|(t, _)| *t);
    let rows: Vec<ResultRow> = done.into_iter().map(|(_, r)| r).collect();
    write_results(&spec.output.results_csv, &rows)?;
    let agg = aggregate(&rows);
    if let Some(p) = &spec.output.aggregate_csv {
        std::fs::write(p, aggregate_to_csv(&agg))?;
    }
    let table = table_from_rows(&rows, spec.output.table_shape);
    if let Some(p) = &spec.output.table_md {
        std::fs::write(p, &table)?;
    }
    Ok(ExperimentOutput {
        instances: suite,
        rows,
        aggregate: agg,
        table,
    })
}

/// Re-evaluates stored solutions of optimal rows; returns a description of
/// every row whose recomputed objective differs from the reported one.
pub fn check_stored_solutions(rows: &[ResultRow], solutions_dir: &Path) -> Result<Vec<String>, BenchError> {
    let mut instances = HashMap::new();
    let mut bad = Vec::new();
    for row in rows.iter().filter(|r| r.status == SolveStatus::Optimal) {
        if !instances.contains_key(&row.instance_id) {
            let text = std::fs::read_to_string(instance_file(solutions_dir, &row.instance_id))?;
            instances.insert(row.instance_id.clone(), crate::Instance::from_json(&text)?);
        }
        let inst = &instances[&row.instance_id];
        let sol: crate::Solution =
            serde_json::from_str(&std::fs::read_to_string(solution_file(solutions_dir, &row.instance_id, &row.key()))?)?;
        let recomputed = crate::solve::recompute_objective(inst, &sol);
        match (recomputed, row.objective) {
            (Some(a), Some(b)) if crate::solve::objectives_agree(a, b) => {}
            (a, b) => bad.push(format!("{row}: reported {b:?}, recomputed {a:?}")),
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, status: SolveStatus, obj: Option<f64>) -> ResultRow {
        ResultRow {
            instance_id: id.into(),
            n: 4,
            m: 1,
            alpha: 0.8,
            gamma: 1.0,
            model: "relative".into(),
            toggles: "sym+fill".into(),
            status,
            objective: obj,
            bound: obj,
            gap: obj.map(|_| 0.0),
            runtime_s: 0.125,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row("a", SolveStatus::Optimal, Some(12.5)),
            row("b", SolveStatus::Infeasible, None),
            row("c", SolveStatus::FeasibleTimeout, Some(1.0 / 3.0)),
        ];
        let text = results_to_string(&rows).unwrap();
        assert!(text.starts_with(RESULTS_HEADER));
        assert!(text.contains("b,4,1,0.8,1.0,relative,sym+fill,infeasible,,,,0.125"));
        assert_eq!(parse_results(&text).unwrap(), rows);
    }

    #[test]
    fn empty_results_have_a_header() {
        assert_eq!(results_to_string(&[]).unwrap(), format!("{RESULTS_HEADER}\n"));
        assert!(parse_results("x,y\n1,2\n").is_err());
    }

    #[test]
    fn spec_validation() {
        let text = r#"{
            "suite": {"n":[4],"m":[1],"alpha":[1.0],"gamma":[1.0],"p_min":1,"p_max":12,"count":2,"base_seed":1},
            "energy_function": {"file": "f.json"},
            "runs": [{"model":"relative","symmetry":true,"horizon_fill":true}],
            "time_limit_s": 10,
            "output": {"results_csv": "out/results.csv"}
        }"#;
        let mut spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        spec.resolve_paths(Path::new("/base"));
        assert_eq!(spec.output.results_csv, PathBuf::from("/base/out/results.csv"));
        assert!(spec.validate().is_ok());
        spec.runs.push(spec.runs[0]);
        assert!(spec.validate().is_err());
        spec.runs.clear();
        assert!(spec.validate().is_err());
    }
}
