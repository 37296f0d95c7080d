use idle_energy::energy::{EnergyFunction, EnergyMode};
use idle_energy::generator::{generate, GenParams};
use idle_energy::{check_feasibility, evaluate, validate_instance, Instance, Job, Solution};
use proptest::prelude::*;

fn function() -> EnergyFunction {
    EnergyFunction::from_modes(&[EnergyMode::on(40.0), EnergyMode::new("off", 0.0, 10.0, 100.0)]).unwrap()
}

/// A generated instance with loose deadlines and a left-shifted schedule
/// for a random assignment; `None` when that schedule misses a deadline.
fn scheduled(n: usize, m: usize, seed: u64, assign: &[usize]) -> Option<(Instance, Solution)> {
    let params = GenParams {
        n,
        m,
        p_min: 1,
        p_max: 12,
        alpha: 1.0,
        beta: 1.0,
        gamma: 3.0,
        seed,
    };
    let inst = generate(&params, &function(), 75.0).unwrap();
    let assignment: Vec<usize> = assign[..n].iter().map(|a| a % m + 1).collect();
    let mut start = vec![0.0; n];
    for k in 1..=m {
        let mut jobs: Vec<usize> = (0..n).filter(|&j| assignment[j] == k).collect();
        jobs.sort_by_key(|&j| (inst.jobs[j].r, j));
        let mut t = 0i64;
        for j in jobs {
            let s = t.max(inst.jobs[j].r);
            start[j] = s as f64;
            t = s + inst.jobs[j].p;
        }
    }
    let sol = Solution { assignment, start };
    check_feasibility(&inst, &sol).unwrap().is_empty().then_some((inst, sol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn machine_relabelling_keeps_total(
        n in 1usize..9, m in 1usize..4, seed in 0u64..10_000,
        assign in prop::collection::vec(0usize..100, 9),
        shift in 1usize..4,
    ) {
        let Some((inst, sol)) = scheduled(n, m, seed, &assign) else { return Ok(()) };
        let base = evaluate(&inst, &sol).unwrap();
        let relabelled = Solution {
            assignment: sol.assignment.iter().map(|&k| (k - 1 + shift) % m + 1).collect(),
            start: sol.start.clone(),
        };
        let ev = evaluate(&inst, &relabelled).unwrap();
        prop_assert_eq!(ev.total, base.total);
        prop_assert_eq!(ev.idle_energy, base.idle_energy);
    }

    #[test]
    fn job_input_order_is_irrelevant(
        n in 1usize..9, m in 1usize..4, seed in 0u64..10_000,
        assign in prop::collection::vec(0usize..100, 9),
        perm_keys in prop::collection::vec(any::<u32>(), 9),
    ) {
        let Some((inst, sol)) = scheduled(n, m, seed, &assign) else { return Ok(()) };
        let base = evaluate(&inst, &sol).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&j| (perm_keys[j], j));
        let mut shuffled = inst.clone();
        shuffled.jobs = order.iter().map(|&j| inst.jobs[j].clone()).collect();
        let sol2 = Solution {
            assignment: order.iter().map(|&j| sol.assignment[j]).collect(),
            start: order.iter().map(|&j| sol.start[j]).collect(),
        };
        let ev = evaluate(&shuffled, &sol2).unwrap();
        prop_assert_eq!(ev.total, base.total);
        prop_assert_eq!(ev.onoff_energy, base.onoff_energy);
    }

    #[test]
    fn processing_constant_only_shifts_total(
        n in 1usize..9, m in 1usize..4, seed in 0u64..10_000,
        assign in prop::collection::vec(0usize..100, 9),
        c in 0u32..1000,
    ) {
        let Some((inst, sol)) = scheduled(n, m, seed, &assign) else { return Ok(()) };
        let base = evaluate(&inst, &sol).unwrap();
        let mut with_proc = inst.clone();
        for j in &mut with_proc.jobs {
            j.e_proc = Some(c as f64);
        }
        let ev = evaluate(&with_proc, &sol).unwrap();
        prop_assert_eq!(ev.total, base.total + n as f64 * c as f64);
        prop_assert_eq!(ev.idle_plus_onoff(), base.idle_plus_onoff());
        prop_assert_eq!(ev.machines, base.machines);
    }
}

#[test]
fn evaluate_examples() {
    let on = EnergyFunction::always_on(40.0).unwrap();
    let inst = Instance::new(1, 50.0, on.clone(), vec![Job::new(1, 2, 0, 20), Job::new(2, 3, 0, 20)]);
    let ev = evaluate(&inst, &Solution { assignment: vec![1, 1], start: vec![0.0, 5.0] }).unwrap();
    // Gap 5 - 2 = 3 at 40 per unit, plus one machine switched on.
    assert_eq!((ev.idle_energy, ev.onoff_energy, ev.total), (40.0 * 3.0, 50.0, 40.0 * 3.0 + 50.0));

    let two = Instance::new(2, 50.0, on, inst.jobs.clone());
    let ev = evaluate(&two, &Solution { assignment: vec![1, 2], start: vec![1.0, 4.0] }).unwrap();
    assert_eq!((ev.idle_energy, ev.onoff_energy), (0.0, 100.0));

    let ev = evaluate(&inst, &Solution { assignment: vec![1, 1], start: vec![0.0, 2.0] }).unwrap();
    assert_eq!(ev.idle_energy, 0.0);
    assert_eq!(ev.pred, vec![None, Some(1)]);
}

#[test]
fn feasibility_examples() {
    let inst = Instance::new(
        1,
        50.0,
        EnergyFunction::always_on(40.0).unwrap(),
        vec![Job::new(1, 2, 0, 20), Job::new(2, 3, 0, 20)],
    );
    let ok = Solution { assignment: vec![1, 1], start: vec![0.0, 2.0] };
    assert!(check_feasibility(&inst, &ok).unwrap().is_empty());
    let overlap = Solution { assignment: vec![1, 1], start: vec![0.0, 1.0] };
    assert_eq!(check_feasibility(&inst, &overlap).unwrap().len(), 1);
    let early = Solution { assignment: vec![1, 1], start: vec![-1.0, 2.0] };
    assert!(!check_feasibility(&inst, &early).unwrap().is_empty());
    assert!(validate_instance(&inst).is_ok());
}
