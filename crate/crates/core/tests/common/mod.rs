#![allow(dead_code)]

use std::path::PathBuf;

use idle_energy::energy::EnergyFunction;
use idle_energy::generator::{generate, GenParams};
use idle_energy::solve::SolverCommand;
use idle_energy::Instance;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load_function(name: &str) -> EnergyFunction {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    serde_json::from_str(&text).expect("fixture parses")
}

/// Two-mode function with a jump at 8: staying on costs 320 there, switching 200.
pub fn desk_function() -> EnergyFunction {
    load_function("f_two_mode_desk.json")
}

pub fn solver() -> SolverCommand {
    SolverCommand::detect().expect("an external MILP solver (cbc or highspy) must be available")
}

/// Seeded small instances with `p ∈ [1, 12]`, `α = β = γ = 1`, kept only when
/// the horizon is at most `max_h`.
pub fn small_instances(count: usize, max_n: usize, max_m: usize, max_h: i64, f: &EnergyFunction, seed: u64) -> Vec<Instance> {
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        s += 1;
        let n = 1 + (s as usize * 7 + 3) % max_n;
        let m = 1 + (s as usize / 3) % max_m;
        let params = GenParams {
            n,
            m,
            p_min: 1,
            p_max: 12,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            seed: s,
        };
        let inst = generate(&params, f, f.final_intercept()).expect("valid parameters");
        if inst.horizon() <= max_h {
            out.push(inst);
        }
    }
    out
}
