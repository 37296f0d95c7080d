mod common;

use idle_energy::energy::EnergyFunction;
use idle_energy::solve::{brute_force, dp_timing, OracleConfig, OracleMethod, SolveStatus};
use idle_energy::{evaluate, Instance, Job, Solution};
use proptest::prelude::*;

fn optimum(inst: &Instance, cfg: &OracleConfig) -> Option<f64> {
    let r = brute_force(inst, cfg).unwrap();
    assert!(matches!(r.status, SolveStatus::Optimal | SolveStatus::Infeasible));
    r.objective
}

fn with_machines(inst: &Instance, m: usize) -> Instance {
    Instance { machines: m, ..inst.clone() }
}

#[test]
fn extra_machines_beyond_n_change_nothing() {
    let f = common::desk_function();
    for inst in common::small_instances(40, 5, 2, 100, &f, 7100) {
        let n = inst.n();
        let at_n = optimum(&with_machines(&inst, n), &OracleConfig::default());
        assert!(at_n.is_some(), "one machine per job is always feasible");
        for m in [n + 1, n + 3] {
            assert_eq!(optimum(&with_machines(&inst, m), &OracleConfig::default()), at_n);
        }
        if let Some(v) = optimum(&inst, &OracleConfig::default()) {
            assert!(v >= at_n.unwrap() - 1e-9);
        }
    }
}

#[test]
fn optimum_ignores_job_order_and_machine_labels() {
    let f = common::desk_function();
    for (t, inst) in common::small_instances(40, 6, 2, 100, &f, 7300).into_iter().enumerate() {
        let base = brute_force(&inst, &OracleConfig::default()).unwrap();
        // Reverse the input order and renumber ids to match positions.
        let mut rev = inst.clone();
        rev.jobs = inst.jobs.iter().rev().cloned().collect();
        for (i, j) in rev.jobs.iter_mut().enumerate() {
            j.id = i + 1;
        }
        assert_eq!(optimum(&rev, &OracleConfig::default()), base.objective);
        // Without the relabelling reduction every machine labelling is tried.
        let full = OracleConfig { symmetry_reduction: false, ..OracleConfig::default() };
        assert_eq!(optimum(&inst, &full), base.objective);
        if let Some(sol) = base.solution {
            let m = inst.machines;
            let relabelled = Solution {
                assignment: sol.assignment.iter().map(|&k| (k + t) % m + 1).collect(),
                start: sol.start.clone(),
            };
            let ev = evaluate(&inst, &relabelled).unwrap();
            assert!((ev.idle_plus_onoff() - base.objective.unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn both_methods_agree() {
    let f = common::desk_function();
    let dp = OracleConfig { method: OracleMethod::SubsetDp, ..OracleConfig::default() };
    for inst in common::small_instances(60, 7, 3, 120, &f, 7500) {
        assert_eq!(optimum(&inst, &dp), optimum(&inst, &OracleConfig::default()), "{}", inst.to_json());
    }
}

// Integer starts suffice when all data and all breakpoints of f are
// integers. Fix the machine sequences and, for every gap, the piece of f it
// falls in. What remains is an LP over start times whose constraints all
// have the form S_b - S_a >= c or S_j <= c with integer c (windows, no
// overlap, piece bounds), and the objective is linear. Its constraint matrix
// is a network matrix, so an optimal vertex is integral. The half-step grid
// contains the integer grid, so it can never do worse, and by the argument
// it never does better either.
#[test]
fn half_step_grid_finds_nothing_better() {
    let f = common::desk_function();
    let half = OracleConfig { grid_divisor: 2, ..OracleConfig::default() };
    for inst in common::small_instances(50, 5, 2, 80, &f, 7700) {
        assert_eq!(optimum(&inst, &half), optimum(&inst, &OracleConfig::default()), "{}", inst.to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn back_to_back_needs_no_idle(ps in prop::collection::vec(1i64..15, 1..7)) {
        // All released at 0 with a common deadline equal to the total work.
        let total: i64 = ps.iter().sum();
        let jobs: Vec<Job> = ps.iter().enumerate().map(|(i, &p)| Job::new(i + 1, p, 0, total)).collect();
        let inst = Instance::new(1, 10.0, EnergyFunction::always_on(40.0).unwrap(), jobs);
        let seq: Vec<usize> = (1..=ps.len()).collect();
        let t = dp_timing(&inst, &seq).unwrap().expect("back-to-back fits");
        prop_assert_eq!(t.idle, 0.0);
    }
}
