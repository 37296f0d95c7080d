use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use idle_energy::bench::{
    self, compare_models, emit_energy_curve, emit_plot_data, read_results, run_experiment, table_from_rows,
    ConfigKey, ExperimentSpec, PlotKind, ResultRow, TableShape,
};
use idle_energy::energy::{approximate_pwl, from_transition_graph, read_samples_csv, ApproxOptions, TransitionGraph};
use idle_energy::generator::{default_c_onoff, generate, generate_suite, GenParams, SuiteGrid};
use idle_energy::milp::{write_lp, BigMMode, PwlMethod};
use idle_energy::solve::{build_model, solve_instance, Backend, ModelKind, OracleConfig, SolveRequest, SolverCommand};
use idle_energy::{validate_instance, EnergyFunction, Instance};

/// Idle-energy scheduling on parallel machines with power-saving modes.
#[derive(Parser)]
#[command(name = "idle-energy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one random instance.
    Generate(GenerateArgs),
    /// Generate every instance of a grid spec into a directory.
    GenerateSuite(SuiteArgs),
    /// Solve an instance; the exit code encodes the status.
    Solve(SolveArgs),
    /// Write the LP file of an instance without solving it.
    EmitLp(EmitLpArgs),
    #[command(subcommand)]
    Bench(BenchCommand),
    #[command(subcommand)]
    Energy(EnergyCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(v: OnOff) -> bool {
        matches!(v, OnOff::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Relative,
    Position,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Relative => ModelKind::Relative,
            ModelArg::Position => ModelKind::Position,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    External,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum BigMArg {
    Horizon,
    Tightened,
}

#[derive(Clone, Copy, ValueEnum)]
enum PwlArg {
    SegmentBinary,
    Lambda,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Merged,
    Split,
}

impl From<ShapeArg> for TableShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Merged => TableShape::Merged,
            ShapeArg::Split => TableShape::Split,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    p_min: i64,
    #[arg(long, default_value_t = 100)]
    p_max: i64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Energy-function JSON (modes or pieces).
    #[arg(long)]
    energy_fn: PathBuf,
    /// Defaults to the final-piece intercept of the energy function.
    #[arg(long)]
    c_onoff: Option<f64>,
    /// Writes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Suite grid JSON.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    energy_fn: PathBuf,
    #[arg(long)]
    c_onoff: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "relative")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "on")]
    symmetry: OnOff,
    /// Relative-order model only.
    #[arg(long, value_enum, default_value = "on")]
    horizon_fill: OnOff,
    #[arg(long, value_enum, default_value = "horizon")]
    big_m: BigMArg,
    #[arg(long, value_enum, default_value = "segment-binary")]
    pwl: PwlArg,
}

impl ModelArgs {
    fn request(&self) -> SolveRequest {
        SolveRequest {
            model: self.model.into(),
            symmetry: self.symmetry.into(),
            horizon_fill: self.horizon_fill.into(),
            big_m: match self.big_m {
                BigMArg::Horizon => BigMMode::Horizon,
                BigMArg::Tightened => BigMMode::Tightened,
            },
            pwl: match self.pwl {
                PwlArg::SegmentBinary => PwlMethod::SegmentBinary,
                PwlArg::Lambda => PwlMethod::LambdaWithBinaries,
            },
            ..SolveRequest::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "external")]
    backend: BackendArg,
    /// `cbc`, `highspy`, or a template with `{model}` and `{solution}`
    /// (and optionally `{time_limit}`). Detected when absent.
    #[arg(long)]
    solver_cmd: Option<String>,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Largest instance the oracle accepts.
    #[arg(long, default_value_t = 8)]
    oracle_max_jobs: usize,
    /// Solution JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep solver files here instead of a temporary directory.
    #[arg(long)]
    work_dir: Option<PathBuf>,
    /// Write the model IR as JSON.
    #[arg(long)]
    dump_ir: Option<PathBuf>,
    /// Write the LP file.
    #[arg(long)]
    emit_lp: Option<PathBuf>,
}

#[derive(Args)]
struct EmitLpArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run an experiment spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Re-aggregate a results CSV into a table.
    Table {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "split")]
        shape: ShapeArg,
    },
    /// Compare two configurations run on the same instances.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Configuration to take from `--a`, e.g. `relative[sym+fill]`.
        #[arg(long)]
        a_config: Option<ConfigKey>,
        #[arg(long)]
        b_config: Option<ConfigKey>,
        #[arg(long, value_enum, default_value = "merged")]
        shape: ShapeArg,
    },
    /// Emit plot-ready CSV: boxplot-runtimes or energy-function-curve.
    Plot {
        #[arg(long)]
        kind: String,
        /// Results CSV (boxplot-runtimes).
        #[arg(long)]
        results: Option<PathBuf>,
        /// Energy-function JSON files (energy-function-curve).
        #[arg(long = "energy-fn")]
        energy_fn: Vec<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        max_delta: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate stored solutions of optimal rows.
    Verify {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        solutions_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum EnergyCommand {
    /// Evaluate the energy function at idle lengths.
    Eval {
        #[arg(long)]
        energy_fn: PathBuf,
        #[arg(required = true)]
        delta: Vec<f64>,
    },
    /// Idle length from which each power-saving mode pays off.
    BreakEven {
        #[arg(long)]
        energy_fn: PathBuf,
    },
    /// Build a mode-set energy function from a transition graph.
    FromGraph {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a piecewise-linear function to `delta,energy` samples.
    Approx {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        segments: usize,
        #[arg(long)]
        allow_jumps: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let inst: Instance = read_json(path)?;
    let diag = validate_instance(&inst);
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(v) = diag.violations.first() {
        bail!("invalid instance {}: {v}", path.display());
    }
    Ok(inst)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let f: EnergyFunction = read_json(&a.energy_fn)?;
    let params = GenParams {
        n: a.n,
        m: a.m,
        p_min: a.p_min,
        p_max: a.p_max,
        alpha: a.alpha,
        beta: a.beta,
        gamma: a.gamma,
        seed: a.seed,
    };
    let c = a.c_onoff.unwrap_or_else(|| default_c_onoff(&f));
    let inst = generate(&params, &f, c)?;
    write_out(a.out.as_deref(), &(inst.to_json() + "\n"))
}

fn cmd_generate_suite(a: SuiteArgs) -> Result<()> {
    let f: EnergyFunction = read_json(&a.energy_fn)?;
    let grid: SuiteGrid = read_json(&a.grid)?;
    let c = a.c_onoff.unwrap_or_else(|| default_c_onoff(&f));
    std::fs::create_dir_all(&a.out_dir)?;
    let suite = generate_suite(&grid, &f, c)?;
    for si in &suite {
        std::fs::write(a.out_dir.join(format!("{}.json", si.id)), si.instance.to_json())?;
    }
    eprintln!("wrote {} instances to {}", suite.len(), a.out_dir.display());
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let mut req = a.model.request();
    req.time_limit_s = a.time_limit;
    req.work_dir = a.work_dir.clone();
    req.oracle = OracleConfig {
        max_jobs: a.oracle_max_jobs,
        ..OracleConfig::default()
    };
    req.backend = match a.backend {
        BackendArg::External => Backend::External,
        BackendArg::Oracle => Backend::Oracle,
    };
    if a.dump_ir.is_some() || a.emit_lp.is_some() {
        let ir = build_model(&inst, &req)?;
        if let Some(p) = &a.dump_ir {
            std::fs::write(p, ir.to_json())?;
        }
        if let Some(p) = &a.emit_lp {
            std::fs::write(p, write_lp(&ir)?.0)?;
        }
    }
    if req.backend == Backend::External {
        req.solver = Some(match &a.solver_cmd {
            Some(s) => SolverCommand::parse(s)?,
            None => SolverCommand::detect().context("no MILP solver found; pass --solver-cmd")?,
        });
    }
    let res = solve_instance(&inst, &req)?;
    if let (Some(p), Some(sol)) = (&a.out, &res.solution) {
        std::fs::write(p, sol.to_json())?;
    }
    let summary = serde_json::json!({
        "status": res.status,
        "objective": res.objective,
        "bound": res.bound,
        "gap": res.gap,
        "runtime_s": res.runtime_s,
        "message": res.message,
    });
    println!("{summary}");
    Ok(ExitCode::from(res.status.exit_code() as u8))
}

fn cmd_emit_lp(a: EmitLpArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let ir = build_model(&inst, &a.model.request())?;
    std::fs::write(&a.out, write_lp(&ir)?.0)?;
    eprintln!(
        "{} variables, {} constraints written to {}",
        ir.variables.len(),
        ir.constraints.len(),
        a.out.display()
    );
    Ok(())
}

fn select(rows: Vec<ResultRow>, key: Option<&ConfigKey>) -> Vec<ResultRow> {
    match key {
        Some(k) => rows.into_iter().filter(|r| r.key() == *k).collect(),
        None => rows,
    }
}

fn cmd_bench(c: BenchCommand) -> Result<ExitCode> {
    match c {
        BenchCommand::Run { spec, quiet } => {
            let spec = ExperimentSpec::from_file(&spec)?;
            let progress = |r: &ResultRow| {
                if !quiet {
                    eprintln!("{r}");
                }
            };
            let out = run_experiment(&spec, &progress)?;
            print!("{}", out.table);
            if let Some(dir) = &spec.solutions_dir {
                let bad = bench::check_stored_solutions(&out.rows, dir)?;
                for b in &bad {
                    eprintln!("objective mismatch: {b}");
                }
                if !bad.is_empty() {
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        BenchCommand::Table { results, shape } => {
            print!("{}", table_from_rows(&read_results(&results)?, shape.into()));
        }
        BenchCommand::Compare {
            a,
            b,
            a_config,
            b_config,
            shape,
        } => {
            let ra = select(read_results(&a)?, a_config.as_ref());
            let rb = select(read_results(&b)?, b_config.as_ref());
            let cmp = compare_models(&ra, &rb, shape.into())?;
            print!("{}", cmp.table);
            println!(
                "\n{} instances solved to optimality by both, {} objective disagreements",
                cmp.both_optimal,
                cmp.disagreements.len()
            );
            for d in &cmp.disagreements {
                println!("  {d}");
            }
            if !cmp.disagreements.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        BenchCommand::Plot {
            kind,
            results,
            energy_fn,
            max_delta,
            step,
            out,
        } => {
            let text = match kind.parse::<PlotKind>()? {
                PlotKind::BoxplotRuntimes => {
                    let results = results.context("boxplot-runtimes needs --results")?;
                    emit_plot_data(&read_results(&results)?)
                }
                PlotKind::EnergyFunctionCurve => {
                    if energy_fn.is_empty() {
                        bail!("energy-function-curve needs at least one --energy-fn");
                    }
                    if !(step > 0.0) {
                        bail!("--step must be positive");
                    }
                    let fs = energy_fn
                        .iter()
                        .map(|p| {
                            let label = p.file_stem().map_or("f".into(), |s| s.to_string_lossy().into_owned());
                            Ok((label, read_json::<EnergyFunction>(p)?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let steps = (max_delta / step).floor() as usize;
                    let deltas: Vec<f64> = (0..=steps).map(|i| i as f64 * step).collect();
                    emit_energy_curve(&fs, &deltas)?
                }
            };
            write_out(out.as_deref(), &text)?;
        }
        BenchCommand::Verify { results, solutions_dir } => {
            let bad = bench::check_stored_solutions(&read_results(&results)?, &solutions_dir)?;
            for b in &bad {
                println!("{b}");
            }
            if !bad.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
            println!("all stored optimal solutions reproduce their objectives");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_energy(c: EnergyCommand) -> Result<()> {
    match c {
        EnergyCommand::Eval { energy_fn, delta } => {
            let f: EnergyFunction = read_json(&energy_fn)?;
            for d in delta {
                let mode = f.mode_at(d)?.map(|m| format!(" ({m})")).unwrap_or_default();
                println!("{d}\t{}{mode}", f.evaluate(d)?);
            }
        }
        EnergyCommand::BreakEven { energy_fn } => {
            let f: EnergyFunction = read_json(&energy_fn)?;
            for (mode, t) in f.break_even_times()? {
                println!("{mode}\t{t}");
            }
        }
        EnergyCommand::FromGraph { graph, out } => {
            let g: TransitionGraph = read_json(&graph)?;
            let modes = from_transition_graph(&g)?;
            let f = EnergyFunction::from_modes(&modes)?;
            write_out(out.as_deref(), &(serde_json::to_string_pretty(&f)? + "\n"))?;
        }
        EnergyCommand::Approx {
            samples,
            segments,
            allow_jumps,
            out,
        } => {
            let data = read_samples_csv(&samples)?;
            let approx = approximate_pwl(&data, segments, ApproxOptions { allow_jumps })?;
            eprintln!("{} segments, max error {}", approx.segments, approx.max_error);
            write_out(out.as_deref(), &(serde_json::to_string_pretty(&approx.function)? + "\n"))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a)?,
        Command::GenerateSuite(a) => cmd_generate_suite(a)?,
        Command::Solve(a) => return cmd_solve(a),
        Command::EmitLp(a) => cmd_emit_lp(a)?,
        Command::Bench(c) => return cmd_bench(c),
        Command::Energy(c) => cmd_energy(c)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
