mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use idle_energy::bench::{
    aggregate, aggregate_to_csv, check_stored_solutions, compare_models, emit_energy_curve, emit_plot_data,
    read_results, run_experiment, table_from_rows, EnergySource, ExperimentSpec, OutputPaths, ResultRow, RunConfig,
    TableShape,
};
use idle_energy::generator::SuiteGrid;
use idle_energy::solve::{Backend, ModelKind, OracleConfig, SolveStatus};

fn grid(n: Vec<usize>, m: Vec<usize>, gamma: f64, count: usize) -> SuiteGrid {
    SuiteGrid {
        n,
        m,
        alpha: vec![1.0],
        gamma: vec![gamma],
        beta: 1.0,
        p_min: 1,
        p_max: 12,
        count,
        base_seed: 99,
    }
}

fn run(model: ModelKind, backend: Backend, symmetry: bool, horizon_fill: bool) -> RunConfig {
    RunConfig { model, backend, symmetry, horizon_fill }
}

fn oracle() -> RunConfig {
    run(ModelKind::Relative, Backend::Oracle, false, false)
}

fn spec(dir: &Path, suite: SuiteGrid, runs: Vec<RunConfig>, solver_cmd: Option<String>) -> ExperimentSpec {
    ExperimentSpec {
        name: None,
        suite,
        energy_function: EnergySource::File { file: common::fixture("f_two_mode_desk.json") },
        c_onoff: None,
        runs,
        time_limit_s: 60.0,
        solver_cmd: solver_cmd.or_else(|| Some(common::solver().describe())),
        workers: 2,
        oracle: OracleConfig::default(),
        big_m: Default::default(),
        pwl: Default::default(),
        output: OutputPaths {
            results_csv: dir.join("results.csv"),
            aggregate_csv: Some(dir.join("aggregate.csv")),
            table_md: Some(dir.join("table.md")),
            table_shape: TableShape::Split,
        },
        solutions_dir: Some(dir.join("solutions")),
    }
}

fn by_config(rows: &[ResultRow]) -> BTreeMap<String, Vec<ResultRow>> {
    let mut out: BTreeMap<String, Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.key().to_string()).or_default().push(r.clone());
    }
    out
}

fn infeasible_ids(rows: &[ResultRow]) -> BTreeSet<String> {
    rows.iter().filter(|r| r.status == SolveStatus::Infeasible).map(|r| r.instance_id.clone()).collect()
}

#[test]
fn oracle_suite_has_no_timeouts_and_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), grid(vec![4, 5], vec![1, 2], 1.0, 10), vec![oracle()], None);
    let out = run_experiment(&s, &|_| {}).unwrap();
    assert_eq!(out.rows.len(), 40);
    assert_eq!(out.aggregate.len(), 4);
    for a in &out.aggregate {
        assert_eq!(a.count_timeout(), 0);
        assert!(a.mean_gap.map_or(true, |g| g == 0.0));
        assert_eq!(a.instances, 10);
    }
    // Re-aggregating the saved CSV reproduces every artifact byte for byte.
    let rows = read_results(&s.output.results_csv).unwrap();
    assert_eq!(rows, out.rows);
    assert_eq!(table_from_rows(&rows, TableShape::Split), std::fs::read_to_string(dir.path().join("table.md")).unwrap());
    assert_eq!(aggregate_to_csv(&aggregate(&rows)), std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap());
    assert!(check_stored_solutions(&rows, &dir.path().join("solutions")).unwrap().is_empty());
}

#[test]
fn constraint_toggles_keep_optima_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    // m = 1 with tight deadlines leaves some instances infeasible.
    let runs = vec![
        run(ModelKind::Relative, Backend::External, true, true),
        run(ModelKind::Relative, Backend::External, false, false),
        run(ModelKind::Position, Backend::External, true, false),
        oracle(),
    ];
    let s = spec(dir.path(), grid(vec![5], vec![1, 2], 0.3, 8), runs, None);
    let out = run_experiment(&s, &|_| {}).unwrap();
    assert_eq!(out.rows.len(), 64);
    assert!(out.rows.iter().all(|r| r.status == SolveStatus::Optimal || r.status == SolveStatus::Infeasible));

    let groups = by_config(&out.rows);
    let truth = infeasible_ids(&groups["oracle[none]"]);
    assert!(!truth.is_empty(), "tight windows should produce infeasible instances");
    for rows in groups.values() {
        assert_eq!(infeasible_ids(rows), truth);
    }
    let reference = &groups["oracle[none]"];
    for (name, rows) in &groups {
        let cmp = compare_models(rows, reference, TableShape::Merged);
        if name == "oracle[none]" {
            assert!(cmp.is_err());
            continue;
        }
        let cmp = cmp.unwrap();
        assert!(cmp.disagreements.is_empty(), "{name}: {:?}", cmp.disagreements);
        assert_eq!(cmp.both_optimal, 16 - truth.len());
    }
    let cells: BTreeSet<(usize, usize)> = out.aggregate.iter().map(|a| (a.n, a.m)).collect();
    for cell in cells {
        let counts: BTreeSet<usize> =
            out.aggregate.iter().filter(|a| (a.n, a.m) == cell).map(|a| a.count_infeasible).collect();
        assert_eq!(counts.len(), 1);
    }
    assert!(check_stored_solutions(&out.rows, &dir.path().join("solutions")).unwrap().is_empty());
}

#[test]
fn solver_failures_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let runs = vec![run(ModelKind::Relative, Backend::External, true, true)];
    let s = spec(dir.path(), grid(vec![3], vec![1], 1.0, 2), runs, Some("false {model} {solution}".into()));
    let out = run_experiment(&s, &|_| {}).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert!(out.rows.iter().all(|r| r.status == SolveStatus::Error && r.objective.is_none()));
    assert_eq!(out.aggregate[0].errors, 2);
}

#[test]
fn comparison_on_a_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let runs = vec![run(ModelKind::Relative, Backend::External, true, true), oracle()];
    let s = spec(dir.path(), grid(vec![4], vec![2], 1.0, 3), runs, None);
    let out = run_experiment(&s, &|_| {}).unwrap();
    let groups = by_config(&out.rows);
    let (a, b) = (&groups["relative[sym+fill]"], &groups["oracle[none]"]);
    let cmp = compare_models(a, b, TableShape::Merged).unwrap();
    assert_eq!(cmp.table.lines().count(), 3, "{}", cmp.table);
    assert!(compare_models(a, &[], TableShape::Merged).is_err());
    assert!(compare_models(a, &b[1..], TableShape::Merged).is_err());
}

fn synthetic_row(id: &str, n: usize, model: &str, t: f64) -> ResultRow {
    ResultRow {
        instance_id: id.into(),
        n,
        m: 1,
        alpha: 1.0,
        gamma: 1.0,
        model: model.into(),
        toggles: "none".into(),
        status: SolveStatus::Optimal,
        objective: Some(1.0),
        bound: Some(1.0),
        gap: Some(0.0),
        runtime_s: t,
    }
}

#[test]
fn plot_data() {
    let mut rows = Vec::new();
    for n in [4, 5, 6] {
        for model in ["relative", "position"] {
            rows.push(synthetic_row(&format!("i{n}"), n, model, 0.5));
            rows.push(synthetic_row(&format!("j{n}"), n, model, 1.5));
        }
    }
    let csv = emit_plot_data(&rows);
    let groups: BTreeSet<&str> = csv.lines().skip(1).map(|l| l.rsplit_once(',').unwrap().0).collect();
    assert_eq!(groups.len(), 6);
    assert_eq!(csv.lines().count(), 1 + rows.len());

    let f = common::desk_function();
    let deltas: Vec<f64> = (0..=20).map(f64::from).collect();
    let curve = emit_energy_curve(&[("desk".into(), f.clone())], &deltas).unwrap();
    for (line, d) in curve.lines().skip(1).zip(&deltas) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(value, f.evaluate(*d).unwrap());
    }
}
