//! External MILP solver adapter.
//!
//! A model is written as a CPLEX-LP file into a fresh temporary directory and
//! a solver command is run on it. Commands are templates expanded through
//! `sh -c`:
//!
//! - `{model}`: path of the LP file
//! - `{solution}`: path the solver must write its solution to
//! - `{time_limit}`: time limit in seconds
//!
//! Two solution dialects are recognised. CBC's `solu` output starts with a
//! status line (`Optimal - objective value 12.5`) followed by
//! `index name value reduced-cost` rows. The HiGHS raw format starts with
//! `Model status` and lists values after `# Columns`. Best bounds are read
//! from the solver's standard output (`Lower bound:` / `Dual bound:`).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{SolveError, SolveStatus};
use crate::milp::{write_lp, ModelIR};

/// Environment variable overriding solver detection with a template.
pub const SOLVER_ENV: &str = "IDLE_ENERGY_SOLVER";

const HIGHS_SCRIPT: &str = include_str!("highs_solve.py");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverCommand {
    /// Shell template with `{model}`, `{solution}` and `{time_limit}`.
    Template(String),
    /// The bundled highspy script run by this interpreter.
    Highspy { python: String },
}

impl SolverCommand {
    /// CBC invoked through its interactive-style command line.
    pub fn cbc(binary: &str) -> Self {
        SolverCommand::Template(format!(
            "{} {{model}} sec {{time_limit}} solve solu {{solution}}",
            shell_quote(binary)
        ))
    }

    /// Parses a user-supplied command: `cbc`, `highspy`, or a template.
    pub fn parse(s: &str) -> Result<Self, SolveError> {
        let s = s.trim();
        match s {
            "highspy" => Ok(SolverCommand::Highspy {
                python: "python3".into(),
            }),
            "cbc" => find_cbc()
                .map(|p| Self::cbc(&p.to_string_lossy()))
                .ok_or(SolveError::NoSolver),
            _ if s.contains("{model}") && s.contains("{solution}") => Ok(SolverCommand::Template(s.into())),
            _ => Err(SolveError::Process(format!(
                "solver command {s:?} needs {{model}} and {{solution}} placeholders"
            ))),
        }
    }

    /// `IDLE_ENERGY_SOLVER`, then `cbc` on `PATH` or bundled with PuLP, then
    /// highspy.
    pub fn detect() -> Option<Self> {
        if let Ok(s) = std::env::var(SOLVER_ENV) {
            if !s.trim().is_empty() {
                return Self::parse(&s).ok();
            }
        }
        if let Some(p) = find_cbc() {
            return Some(Self::cbc(&p.to_string_lossy()));
        }
        let ok = Command::new("python3")
            .args(["-c", "import highspy"])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        ok.then(|| SolverCommand::Highspy {
            python: "python3".into(),
        })
    }

    pub fn describe(&self) -> String {
        match self {
            SolverCommand::Template(t) => t.clone(),
            SolverCommand::Highspy { python } => format!("{python} highs_solve.py (highspy)"),
        }
    }
}

fn find_cbc() -> Option<PathBuf> {
    if let Some(path) = std::env::var_os("PATH") {
        for dir in std::env::split_paths(&path) {
            let cand = dir.join("cbc");
            if cand.is_file() {
                return Some(cand);
            }
        }
    }
    let out = Command::new("python3")
        .args(["-c", "import pulp; print(pulp.PULP_CBC_CMD().path)"])
        .stderr(Stdio::null())
        .output()
        .ok()?;
    let p = PathBuf::from(String::from_utf8_lossy(&out.stdout).trim());
    (out.status.success() && p.is_file()).then_some(p)
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Raw outcome of one solver run, in IR variable order.
#[derive(Debug, Clone)]
pub struct ExternalResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub runtime_s: f64,
    pub stdout: String,
}

/// Writes `model`, runs the solver with a watchdog of `time_limit` plus a
/// grace period, and parses its solution file.
pub fn solve_external(
    model: &ModelIR,
    cmd: &SolverCommand,
    time_limit: f64,
    work_dir: Option<&Path>,
) -> Result<ExternalResult, SolveError> {
    let (text, names) = write_lp(model)?;
    let dir = match work_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            tempfile::Builder::new().prefix("solve-").tempdir_in(d)?
        }
        None => tempfile::Builder::new().prefix("idle-energy-").tempdir()?,
    };
    let model_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    std::fs::write(&model_path, text)?;
    let limit = format!("{}", time_limit.max(0.0));

    let line = match cmd {
        SolverCommand::Template(t) => t
            .replace("{model}", &shell_quote(&model_path.to_string_lossy()))
            .replace("{solution}", &shell_quote(&sol_path.to_string_lossy()))
            .replace("{time_limit}", &limit),
        SolverCommand::Highspy { python } => {
            let script = dir.path().join("highs_solve.py");
            std::fs::write(&script, HIGHS_SCRIPT)?;
            format!(
                "{} {} {} {} {}",
                shell_quote(python),
                shell_quote(&script.to_string_lossy()),
                shell_quote(&model_path.to_string_lossy()),
                shell_quote(&sol_path.to_string_lossy()),
                limit
            )
        }
    };

    let started = Instant::now();
    let stdout_path = dir.path().join("stdout.txt");
    let stderr_path = dir.path().join("stderr.txt");
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(format!("exec {line}"))
        .stdin(Stdio::null())
        .stdout(std::fs::File::create(&stdout_path)?)
        .stderr(std::fs::File::create(&stderr_path)?)
        .spawn()
        .map_err(|e| SolveError::Process(format!("cannot start solver: {e}")))?;
    let deadline = Duration::from_secs_f64(time_limit.max(0.0) + (0.5 * time_limit).max(10.0));
    let mut killed = false;
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break s;
        }
        if started.elapsed() > deadline {
            let _ = child.kill();
            killed = true;
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let runtime_s = started.elapsed().as_secs_f64();
    let stdout = std::fs::read_to_string(&stdout_path).unwrap_or_default();

    if killed {
        return Ok(ExternalResult {
            status: SolveStatus::UnknownTimeout,
            objective: None,
            bound: None,
            values: None,
            runtime_s,
            stdout,
        });
    }
    if !status.success() {
        let stderr = std::fs::read_to_string(&stderr_path).unwrap_or_default();
        return Err(SolveError::Process(format!(
            "solver exited with {status}: {}",
            stderr.lines().chain(stdout.lines()).last().unwrap_or("")
        )));
    }
    let sol_text = std::fs::read_to_string(&sol_path)
        .map_err(|e| SolveError::Parse(format!("no solution file: {e}")))?;
    let parsed = parse_solution(&sol_text)?;
    let bound = parse_bound(&stdout);
    Ok(ExternalResult {
        status: parsed.status,
        objective: parsed.objective,
        bound,
        values: parsed.values.map(|v| names.values(&v)),
        runtime_s,
        stdout,
    })
}

/// Contents of a solution file keyed by column name.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: Option<HashMap<String, f64>>,
}

/// Detects the dialect from the first line and parses it.
pub fn parse_solution(text: &str) -> Result<ParsedSolution, SolveError> {
    let first = text.lines().next().unwrap_or("").trim();
    if first == "Model status" {
        parse_highs(text)
    } else {
        parse_cbc(text)
    }
}

fn parse_f64(s: &str) -> Result<f64, SolveError> {
    match s {
        "inf" | "Infinity" | "+inf" => Ok(f64::INFINITY),
        "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| SolveError::Parse(format!("bad number {s:?}"))),
    }
}

fn parse_cbc(text: &str) -> Result<ParsedSolution, SolveError> {
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| SolveError::Parse("empty solution file".into()))?
        .trim();
    let objective = head
        .rsplit_once("objective value")
        .map(|(_, v)| parse_f64(v.trim()))
        .transpose()?;
    let lower = head.to_ascii_lowercase();
    let no_integer = lower.contains("no integer solution") || lower.contains("continuous used");
    let status = if lower.starts_with("optimal") {
        SolveStatus::Optimal
    } else if lower.contains("infeasible") {
        SolveStatus::Infeasible
    } else if lower.starts_with("stopped") {
        if no_integer || objective.is_none() {
            SolveStatus::UnknownTimeout
        } else {
            SolveStatus::FeasibleTimeout
        }
    } else {
        return Err(SolveError::Parse(format!("unrecognised status line {head:?}")));
    };
    if matches!(status, SolveStatus::Infeasible | SolveStatus::UnknownTimeout) {
        return Ok(ParsedSolution {
            status,
            objective: None,
            values: None,
        });
    }
    let mut values = HashMap::new();
    for line in lines {
        let line = line.trim().trim_start_matches("**").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(SolveError::Parse(format!("bad solution row {line:?}")));
        }
        values.insert(fields[1].to_string(), parse_f64(fields[2])?);
    }
    Ok(ParsedSolution {
        status,
        objective,
        values: Some(values),
    })
}

fn parse_highs(text: &str) -> Result<ParsedSolution, SolveError> {
    let mut lines = text.lines().map(str::trim);
    lines.next();
    let model_status = lines.next().unwrap_or("");
    let mut feasible = false;
    let mut objective = None;
    let mut values = HashMap::new();
    let mut in_columns = 0usize;
    let mut section = "";
    for line in lines {
        if in_columns > 0 {
            let (name, v) = line
                .rsplit_once(' ')
                .ok_or_else(|| SolveError::Parse(format!("bad column row {line:?}")))?;
            values.insert(name.to_string(), parse_f64(v)?);
            in_columns -= 1;
            continue;
        }
        if line.starts_with('#') {
            section = line;
            if let Some(count) = line.strip_prefix("# Columns ") {
                in_columns = count
                    .trim()
                    .parse()
                    .map_err(|_| SolveError::Parse(format!("bad column count {count:?}")))?;
            }
            continue;
        }
        if section == "# Primal solution values" {
            if line == "Feasible" {
                feasible = true;
            } else if let Some(v) = line.strip_prefix("Objective ") {
                objective = Some(parse_f64(v.trim())?);
            }
        }
    }
    let timeout = model_status.contains("limit");
    let status = match model_status {
        "Optimal" => SolveStatus::Optimal,
        s if s.contains("nfeasible") => SolveStatus::Infeasible,
        _ if timeout && feasible => SolveStatus::FeasibleTimeout,
        _ if timeout => SolveStatus::UnknownTimeout,
        other => return Err(SolveError::Parse(format!("unhandled model status {other:?}"))),
    };
    let keep = feasible && matches!(status, SolveStatus::Optimal | SolveStatus::FeasibleTimeout);
    Ok(ParsedSolution {
        status,
        objective: if keep { objective } else { None },
        values: keep.then_some(values),
    })
}

/// Best bound from solver standard output, if it reports a finite one.
pub fn parse_bound(stdout: &str) -> Option<f64> {
    stdout
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            let rest = l
                .strip_prefix("Lower bound:")
                .or_else(|| l.strip_prefix("Dual bound:"))
                .or_else(|| l.strip_prefix("Dual bound"))?;
            rest.split_whitespace().next()?.parse::<f64>().ok()
        })
        .filter(|v| v.is_finite())
        .last()
}
