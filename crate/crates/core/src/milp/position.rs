//! Position-based reference model: jobs are assigned to ordinal positions on
//! each machine and completion times belong to positions.
//!
//! `y_{l,k}` marks a switch to the power-saving mode in the gap after
//! position `l`. Differences from the printed reference formulation:
//!
//! - the sequencing row is `c_{l,k} >= c_{l-1,k} + p_{l,k} + y_{l-1,k} T_sw`
//!   (printed as `c_{l,k} <= c_{l-1,k} + p_{i,l,k} + y_{l,k} T_sw`), so idle
//!   time is allowed and a switched gap lasts at least `T_sw`;
//! - the energy rows measure the gap after position `l` as
//!   `c_{l+1,k} - p_{l+1,k} - c_{l,k}`;
//! - the big-M of the staying-on energy row is `P_on · H` (an energy);
//! - `o_k` machine-usage binaries add `C_onoff` per used machine so the
//!   objective matches the relative-order model;
//! - `y_{l,k} <= Σ_i x_{i,l+1,k}`: no switch into an empty position, which
//!   would otherwise let a gap be split in two.

use serde::{Deserialize, Serialize};

use super::ir::{LinExpr, ModelIR, Relation, VarId};
use super::ModelError;
use crate::energy::EnergyFunction;
use crate::problem::{EvaluatedSolution, Instance};

/// On mode plus a single power-saving mode, as the reference model expects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub p_on: f64,
    pub p_sb: f64,
    /// Break-even time: the shortest gap for which switching is used.
    pub t_sw: f64,
    /// Energy of a switched gap of length exactly `t_sw`.
    pub c_sw: f64,
}

impl TwoModeParams {
    /// Reads the parameters off an energy function with at most two pieces.
    pub fn from_function(f: &EnergyFunction) -> Result<Self, ModelError> {
        let pieces = f.pieces();
        match pieces {
            [on] => Ok(Self {
                p_on: on.slope,
                p_sb: on.slope,
                t_sw: 0.0,
                c_sw: 0.0,
            }),
            [on, save] => Ok(Self {
                p_on: on.slope,
                p_sb: save.slope,
                t_sw: save.lo,
                c_sw: save.value(save.lo),
            }),
            _ => Err(ModelError::Unsupported(format!(
                "{} pieces; the position-based model needs at most two",
                pieces.len()
            ))),
        }
    }

    /// Gap cost as the model prices it when choosing the cheaper branch.
    pub fn cost(&self, gap: f64) -> f64 {
        let on = self.p_on * gap;
        if gap >= self.t_sw {
            on.min(self.c_sw + self.p_sb * (gap - self.t_sw))
        } else {
            on
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionOptions {
    pub symmetry: bool,
}

impl Default for PositionOptions {
    fn default() -> Self {
        Self { symmetry: true }
    }
}

#[derive(Debug, Clone)]
pub struct PositionModel {
    pub ir: ModelIR,
    pub params: TwoModeParams,
    n: usize,
    m: usize,
    /// `x[k][l][i]`, all 0-based.
    x: Vec<Vec<Vec<VarId>>>,
    y: Vec<Vec<VarId>>,
    c: Vec<Vec<VarId>>,
    e: Vec<Vec<VarId>>,
    o: Vec<VarId>,
}

pub fn build_position_based(
    inst: &Instance,
    params: TwoModeParams,
    opts: PositionOptions,
) -> Result<PositionModel, ModelError> {
    super::check_job_ids(inst)?;
    let n = inst.n();
    let m = inst.machines;
    let h = inst.horizon() as f64;
    let big_e = params.p_on * h;
    let jobs = &inst.jobs;
    let mut ir = ModelIR::new("position_based");

    let mut x = Vec::with_capacity(m);
    for k in 1..=m {
        let mut per_l = Vec::with_capacity(n);
        for l in 1..=n {
            let row: Vec<VarId> = (1..=n)
                .map(|i| {
                    let v = ir.binary(format!("x_{i}_{l}_{k}"));
                    ir.annotate(v, "position", &[i, l, k]);
                    v
                })
                .collect();
            per_l.push(row);
        }
        x.push(per_l);
    }
    let mut y = vec![Vec::with_capacity(n); m];
    let mut c = vec![Vec::with_capacity(n); m];
    let mut e = vec![Vec::with_capacity(n.saturating_sub(1)); m];
    for k in 1..=m {
        for l in 1..=n {
            let v = ir.binary(format!("y_{l}_{k}"));
            ir.annotate(v, "switch_after", &[l, k]);
            y[k - 1].push(v);
        }
        for l in 1..=n {
            let v = ir.continuous(format!("c_{l}_{k}"), 0.0, h);
            ir.annotate(v, "completion", &[l, k]);
            c[k - 1].push(v);
        }
        for l in 1..n {
            let v = ir.continuous(format!("E_{l}_{k}"), 0.0, f64::INFINITY);
            ir.annotate(v, "gap_energy", &[l, k]);
            e[k - 1].push(v);
        }
    }
    let o: Vec<VarId> = (1..=m)
        .map(|k| {
            let v = ir.binary(format!("o_{k}"));
            ir.annotate(v, "machine_on", &[k]);
            v
        })
        .collect();

    let mut objective = LinExpr::new();
    for ek in &e {
        for &v in ek {
            objective.add(v, 1.0);
        }
    }
    for &v in &o {
        objective.add(v, inst.c_onoff);
    }

    // Σ_i x_{i,l,k} · w_i as an expression
    let occupied = |k: usize, l: usize, w: &dyn Fn(usize) -> f64, scale: f64| -> LinExpr {
        let mut ex = LinExpr::new();
        for i in 0..n {
            let c = w(i) * scale;
            if c != 0.0 {
                ex.add(x[k][l][i], c);
            }
        }
        ex
    };
    let one = |_: usize| 1.0;
    let p = |i: usize| jobs[i].p as f64;

    for i in 0..n {
        let mut ex = LinExpr::new();
        for k in 0..m {
            for l in 0..n {
                ex.add(x[k][l][i], 1.0);
            }
        }
        ir.constrain(format!("assign_{}", i + 1), ex, Relation::Eq, 1.0);
    }
    for k in 0..m {
        for l in 0..n {
            let (l1, k1) = (l + 1, k + 1);
            ir.constrain(format!("slot_{l1}_{k1}"), occupied(k, l, &one, 1.0), Relation::Le, 1.0);

            let mut ex = LinExpr::new().term(c[k][l], 1.0);
            ex.extend(&occupied(k, l, &|i| (jobs[i].p + jobs[i].r) as f64, -1.0));
            ir.constrain(format!("rel_{l1}_{k1}"), ex, Relation::Ge, 0.0);

            let mut ex = LinExpr::new().term(c[k][l], 1.0);
            ex.extend(&occupied(k, l, &|i| h - jobs[i].d as f64, 1.0));
            ir.constrain(format!("dl_{l1}_{k1}"), ex, Relation::Le, h);

            let mut ex = LinExpr::new().term(c[k][l], 1.0);
            ex.extend(&occupied(k, l, &p, -1.0));
            if l > 0 {
                ex.add(c[k][l - 1], -1.0);
                if params.t_sw != 0.0 {
                    ex.add(y[k][l - 1], -params.t_sw);
                }
            }
            ir.constrain(format!("seq_{l1}_{k1}"), ex, Relation::Ge, 0.0);

            let mut ex = LinExpr::new().term(o[k], 1.0);
            ex.extend(&occupied(k, l, &one, -1.0));
            ir.constrain(format!("use_{l1}_{k1}"), ex, Relation::Ge, 0.0);

            let mut ex = LinExpr::new().term(y[k][l], 1.0);
            if l + 1 < n {
                ex.extend(&occupied(k, l + 1, &one, -1.0));
            }
            ir.constrain(format!("ynext_{l1}_{k1}"), ex, Relation::Le, 0.0);
        }
        for l in 0..n.saturating_sub(1) {
            let (l1, k1) = (l + 1, k + 1);
            // gap after position l: c_{l+1} - p_{l+1} - c_l
            let gap = |scale: f64| {
                let mut ex = LinExpr::new()
                    .term(c[k][l + 1], -scale)
                    .term(c[k][l], scale);
                ex.extend(&occupied(k, l + 1, &p, scale));
                ex
            };
            let mut ex = LinExpr::new().term(e[k][l], 1.0).term(y[k][l], big_e);
            ex.extend(&gap(params.p_on));
            ir.constrain(format!("eon_{l1}_{k1}"), ex, Relation::Ge, 0.0);

            let mut ex = LinExpr::new().term(e[k][l], 1.0).term(y[k][l], -params.c_sw);
            ex.extend(&gap(params.p_sb));
            ir.constrain(format!("esb_{l1}_{k1}"), ex, Relation::Ge, -params.p_sb * params.t_sw);
        }
    }

    if opts.symmetry {
        for k in 0..m.saturating_sub(1) {
            let mut ex = occupied(k, 0, &one, 1.0);
            ex.extend(&occupied(k + 1, 0, &one, -1.0));
            ir.constrain(format!("symm_{}", k + 1), ex, Relation::Ge, 0.0);
        }
        for i in 0..m.min(n) {
            let mut ex = LinExpr::new();
            for k in 0..=i {
                for l in 0..n {
                    ex.add(x[k][l][i], 1.0);
                }
            }
            ir.constrain(format!("symj_{}", i + 1), ex, Relation::Eq, 1.0);
        }
        for k in 0..m {
            for l in 0..n.saturating_sub(1) {
                let mut ex = occupied(k, l, &one, 1.0);
                ex.extend(&occupied(k, l + 1, &one, -1.0));
                ir.constrain(format!("left_{}_{}", l + 1, k + 1), ex, Relation::Ge, 0.0);
            }
        }
    }

    ir.objective = objective;
    Ok(PositionModel {
        ir,
        params,
        n,
        m,
        x,
        y,
        c,
        e,
        o,
    })
}

impl PositionModel {
    /// Variable values for a known feasible schedule; machines relabelled in
    /// order of first use by job id, jobs packed into the leftmost positions.
    pub fn encode(&self, inst: &Instance, ev: &EvaluatedSolution) -> Vec<f64> {
        let mut v = vec![0.0; self.ir.variables.len()];
        let mut scheds = ev.machines.clone();
        scheds.sort_by_key(|ms| ms.jobs.iter().min().copied());
        for (k, ms) in scheds.iter().enumerate() {
            v[self.o[k].0] = 1.0;
            let mut last_c = 0.0;
            for (l, &j) in ms.jobs.iter().enumerate() {
                v[self.x[k][l][j - 1].0] = 1.0;
                last_c = ev.solution.start[j - 1] + inst.jobs[j - 1].p as f64;
                v[self.c[k][l].0] = last_c;
            }
            for l in ms.jobs.len()..self.n {
                v[self.c[k][l].0] = last_c;
            }
            for (l, &gap) in ms.gaps.iter().enumerate() {
                let on = self.params.p_on * gap;
                let switched = gap >= self.params.t_sw
                    && self.params.c_sw + self.params.p_sb * (gap - self.params.t_sw) < on;
                v[self.y[k][l].0] = if switched { 1.0 } else { 0.0 };
                v[self.e[k][l].0] = self.params.cost(gap);
            }
        }
        debug_assert!(scheds.len() <= self.m);
        v
    }
}
