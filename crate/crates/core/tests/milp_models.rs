mod common;

use idle_energy::energy::{EnergyFunction, EnergyMode};
use idle_energy::generator::{generate, GenParams};
use idle_energy::milp::{
    big_m, build_position_based, build_relative_order, linearize_pwl, BigMMode, LinExpr, ModelIR, PositionOptions,
    PwlMethod, RelativeOptions, TwoModeParams,
};
use idle_energy::solve::{
    brute_force, solve_external, solve_instance, Backend, ModelKind, OracleConfig, SolveRequest, SolveStatus,
};
use idle_energy::{check_feasibility, evaluate, Instance, Job, Solution};
use proptest::prelude::*;

fn three_jobs(m: usize) -> Instance {
    let f = common::desk_function();
    Instance::new(m, 10.0, f, vec![Job::new(1, 2, 0, 20), Job::new(2, 3, 1, 20), Job::new(3, 4, 2, 30)])
}

#[test]
fn relative_variable_counts() {
    let model = build_relative_order(&three_jobs(2), RelativeOptions::plain()).unwrap();
    let ir = &model.ir;
    // Per machine: (n+1)^2 ordered pairs over {0..n} x {1..n+1} minus i = j.
    assert_eq!(ir.count_role("assign"), 3 * 2);
    assert_eq!(ir.count_role("start"), 3);
    assert_eq!(ir.count_role("machine_on"), 2);
    assert_eq!(ir.count_role("gap"), 3 * 2);
    assert_eq!(ir.count_role("precede"), 2 * ((3 + 1) * (3 + 1) - 3));
}

#[test]
fn position_variable_counts() {
    let f = common::desk_function();
    let params = TwoModeParams::from_function(&f).unwrap();
    let model = build_position_based(&three_jobs(2), params, PositionOptions { symmetry: false }).unwrap();
    assert_eq!(model.ir.count_role("position"), 3 * 3 * 2);
    assert_eq!(model.ir.count_role("switch_after"), 3 * 2);
    assert_eq!(model.ir.count_role("completion"), 3 * 2);
}

#[test]
fn big_m_is_the_horizon() {
    let f = EnergyFunction::always_on(40.0).unwrap();
    assert_eq!(big_m(&Instance::new(1, 0.0, f.clone(), vec![Job::new(1, 5, 0, 100)])), 100.0);
    assert_eq!(big_m(&Instance::new(1, 0.0, f, vec![])), 0.0);
}

/// Left-shifted schedule for a random assignment, if it meets all deadlines.
fn scheduled(n: usize, m: usize, seed: u64, assign: &[usize], delays: &[i64]) -> Option<(Instance, Solution)> {
    let f = common::desk_function();
    let params = GenParams {
        n,
        m,
        p_min: 1,
        p_max: 12,
        alpha: 1.0,
        beta: 1.0,
        gamma: 2.0,
        seed,
    };
    let inst = generate(&params, &f, f.final_intercept()).unwrap();
    let assignment: Vec<usize> = assign[..n].iter().map(|a| a % m + 1).collect();
    let mut start = vec![0.0; n];
    for k in 1..=m {
        let mut jobs: Vec<usize> = (0..n).filter(|&j| assignment[j] == k).collect();
        jobs.sort_by_key(|&j| (inst.jobs[j].r, j));
        let mut t = 0i64;
        for j in jobs {
            let s = t.max(inst.jobs[j].r) + delays[j];
            start[j] = s as f64;
            t = s + inst.jobs[j].p;
        }
    }
    let sol = Solution { assignment, start };
    check_feasibility(&inst, &sol).unwrap().is_empty().then_some((inst, sol))
}

fn all_relative_options() -> Vec<RelativeOptions> {
    let mut out = Vec::new();
    for symmetry in [false, true] {
        for horizon_fill in [false, true] {
            for big_m in [BigMMode::Horizon, BigMMode::Tightened] {
                for pwl in [PwlMethod::SegmentBinary, PwlMethod::LambdaWithBinaries] {
                    out.push(RelativeOptions { symmetry, horizon_fill, big_m, pwl });
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn feasible_schedules_satisfy_the_relative_model(
        n in 1usize..7, m in 1usize..3, seed in 0u64..100_000,
        assign in prop::collection::vec(0usize..100, 6),
        delays in prop::collection::vec(0i64..10, 6),
    ) {
        let Some((inst, sol)) = scheduled(n, m, seed, &assign, &delays) else { return Ok(()) };
        let ev = evaluate(&inst, &sol).unwrap();
        for opts in all_relative_options() {
            let model = build_relative_order(&inst, opts).unwrap();
            let x = model.encode(&inst, &ev);
            match model.ir.check_point(&x, 1e-9) {
                Ok(obj) => prop_assert!((obj - ev.idle_plus_onoff()).abs() < 1e-9, "{:?}: {} vs {}", opts, obj, ev.idle_plus_onoff()),
                Err(v) => prop_assert!(false, "{:?} violates {:?}", opts, &v[..v.len().min(5)]),
            }
        }
    }
}

fn three_piece() -> EnergyFunction {
    EnergyFunction::from_modes(&[
        EnergyMode::on(40.0),
        EnergyMode::new("warm", 18.0, 4.0, 90.0),
        EnergyMode::new("off", 0.0, 10.0, 100.0),
    ])
    .unwrap()
}

/// Minimizes the linearized term with the gap fixed to `g`.
fn pwl_minimum(f: &EnergyFunction, g: f64, h: f64, method: PwlMethod) -> f64 {
    let mut ir = ModelIR::new("pwl");
    let gap = ir.continuous("g".into(), g, g);
    let term = linearize_pwl(&mut ir, f, gap, h, method, "t");
    ir.objective = term.objective;
    let r = solve_external(&ir, &common::solver(), 30.0, None).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    r.objective.unwrap()
}

#[test]
fn linearized_term_equals_f_at_every_integer_gap() {
    let h = 30.0;
    for f in [common::desk_function(), three_piece()] {
        for method in [PwlMethod::SegmentBinary, PwlMethod::LambdaWithBinaries] {
            for g in 0..=h as i64 {
                let want = f.evaluate(g as f64).unwrap();
                let got = pwl_minimum(&f, g as f64, h, method);
                assert!((got - want).abs() < 1e-6, "{method:?} g={g}: {got} vs {want}");
            }
        }
    }
    // A single piece needs no solver: the term is the slope times the gap.
    let mut ir = ModelIR::new("lin");
    let gap = ir.continuous("g".into(), 0.0, h);
    let term = linearize_pwl(&mut ir, &EnergyFunction::always_on(40.0).unwrap(), gap, h, PwlMethod::SegmentBinary, "t");
    assert_eq!(term.objective, LinExpr::new().term(gap, 40.0));
}

fn request(model: ModelKind, big_m: BigMMode, pwl: PwlMethod) -> SolveRequest {
    SolveRequest {
        model,
        backend: Backend::External,
        big_m,
        pwl,
        time_limit_s: 60.0,
        solver: Some(common::solver()),
        ..SolveRequest::default()
    }
}

#[test]
fn tightened_big_m_and_lambda_keep_the_optimum() {
    let f = common::desk_function();
    for inst in common::small_instances(50, 5, 2, 100, &f, 8100) {
        let oracle = brute_force(&inst, &OracleConfig::default()).unwrap();
        let r = solve_instance(&inst, &request(ModelKind::Relative, BigMMode::Tightened, PwlMethod::SegmentBinary)).unwrap();
        assert_eq!(r.status, oracle.status, "{}", inst.to_json());
        if let (Some(a), Some(b)) = (r.objective, oracle.objective) {
            assert!((a - b).abs() < 1e-6, "tightened: {a} vs {b} on {}", inst.to_json());
        }
    }
    for inst in common::small_instances(15, 5, 2, 100, &f, 8300) {
        let oracle = brute_force(&inst, &OracleConfig::default()).unwrap();
        let r = solve_instance(&inst, &request(ModelKind::Relative, BigMMode::Horizon, PwlMethod::LambdaWithBinaries)).unwrap();
        assert_eq!(r.status, oracle.status);
        if let (Some(a), Some(b)) = (r.objective, oracle.objective) {
            assert!((a - b).abs() < 1e-6, "lambda: {a} vs {b}");
        }
    }
}

#[test]
fn position_model_switches_only_when_cheaper() {
    // Desk function: switching costs 200 and takes 8; staying on costs 40 per unit.
    let f = common::desk_function();
    let params = TwoModeParams::from_function(&f).unwrap();
    assert_eq!((params.p_on, params.t_sw, params.c_sw), (40.0, 8.0, 200.0));
    for (gap, idle) in [(8, 200.0), (5, 200.0), (4, 160.0), (12, 200.0 + 18.0 * 4.0)] {
        let jobs = vec![Job::new(1, 2, 0, 2), Job::new(2, 3, 2 + gap, 5 + gap)];
        let inst = Instance::new(1, 10.0, f.clone(), jobs);
        let r = solve_instance(&inst, &request(ModelKind::Position, BigMMode::Horizon, PwlMethod::SegmentBinary)).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - (10.0 + idle)).abs() < 1e-6, "gap {gap}: {:?}", r.objective);
    }
}

#[test]
fn position_model_rejects_more_than_two_modes() {
    assert!(TwoModeParams::from_function(&three_piece()).is_err());
    let on = TwoModeParams::from_function(&EnergyFunction::always_on(40.0).unwrap()).unwrap();
    assert_eq!((on.p_on, on.p_sb, on.t_sw, on.c_sw), (40.0, 40.0, 0.0, 0.0));
}

#[test]
fn empty_positions_carry_no_job() {
    let f = common::desk_function();
    let inst = Instance::new(2, 10.0, f.clone(), vec![Job::new(1, 2, 0, 9), Job::new(2, 3, 0, 9)]);
    let sol = Solution { assignment: vec![1, 2], start: vec![0.0, 0.0] };
    let ev = evaluate(&inst, &sol).unwrap();
    let params = TwoModeParams::from_function(&f).unwrap();
    let model = build_position_based(&inst, params, PositionOptions::default()).unwrap();
    let x = model.encode(&inst, &ev);
    assert!((model.ir.check_point(&x, 1e-9).unwrap() - 20.0).abs() < 1e-9);
    for k in 1..=2 {
        let row: f64 = (1..=2).map(|i| x[model.ir.var(&format!("x_{i}_2_{k}")).unwrap().0]).sum();
        assert_eq!(row, 0.0);
    }
}
