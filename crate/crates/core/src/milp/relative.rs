//! Relative-order model: per machine, which job immediately precedes which.
//!
//! Job indices are 1..=n; index 0 is the dummy start (time 0) and n+1 the
//! dummy end (time H). Dummies appear only inside `x`, never in `a`, `s` or
//! `z`.

use serde::{Deserialize, Serialize};

use super::ir::{LinExpr, ModelIR, Relation, VarId};
use super::pwl::{linearize_pwl, PwlMethod, PwlTerm};
use super::{big_m, big_m_pair, BigMMode, ModelError};
use crate::problem::{EvaluatedSolution, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelativeOptions {
    pub symmetry: bool,
    pub horizon_fill: bool,
    #[serde(default)]
    pub big_m: BigMMode,
    #[serde(default)]
    pub pwl: PwlMethod,
}

impl Default for RelativeOptions {
    fn default() -> Self {
        Self {
            symmetry: true,
            horizon_fill: true,
            big_m: BigMMode::Horizon,
            pwl: PwlMethod::SegmentBinary,
        }
    }
}

impl RelativeOptions {
    pub fn plain() -> Self {
        Self {
            symmetry: false,
            horizon_fill: false,
            ..Self::default()
        }
    }
}

/// Built model plus handles for encoding known schedules.
#[derive(Debug, Clone)]
pub struct RelativeOrderModel {
    pub ir: ModelIR,
    n: usize,
    m: usize,
    a: Vec<Vec<VarId>>,
    /// `x[k][i][j]`, `None` where `i == j` or the pair is not modelled.
    x: Vec<Vec<Vec<Option<VarId>>>>,
    o: Vec<VarId>,
    s: Vec<VarId>,
    z: Vec<Vec<Option<VarId>>>,
    pwl: Vec<Vec<Option<PwlTerm>>>,
    start_end: Option<Vec<(VarId, VarId)>>,
}

pub fn build_relative_order(inst: &Instance, opts: RelativeOptions) -> Result<RelativeOrderModel, ModelError> {
    super::check_job_ids(inst)?;
    if inst.energy_function.pieces().last().map(|p| p.hi) != Some(f64::INFINITY) {
        return Err(ModelError::Invalid("energy function lacks an unbounded last piece".into()));
    }
    let n = inst.n();
    let m = inst.machines;
    let h = inst.horizon() as f64;
    let jobs = &inst.jobs;
    let end = n + 1;
    let bm = |kind: PairBound, i: usize, j: usize| pair_big_m(inst, opts.big_m, kind, i, j);

    let mut ir = ModelIR::new("relative_order");

    let a: Vec<Vec<VarId>> = (1..=n)
        .map(|j| {
            (1..=m)
                .map(|k| {
                    let v = ir.binary(format!("a_{j}_{k}"));
                    ir.annotate(v, "assign", &[j, k]);
                    v
                })
                .collect()
        })
        .collect();

    let mut x = vec![vec![vec![None; n + 2]; n + 2]; m];
    for k in 1..=m {
        for i in 0..=n {
            for j in 1..=end {
                if i == j {
                    continue;
                }
                let v = ir.binary(format!("x_{i}_{j}_{k}"));
                ir.annotate(v, "precede", &[i, j, k]);
                x[k - 1][i][j] = Some(v);
            }
        }
    }
    let xv = |k: usize, i: usize, j: usize| x[k - 1][i][j].expect("modelled pair");

    let o: Vec<VarId> = (1..=m)
        .map(|k| {
            let v = ir.binary(format!("o_{k}"));
            ir.annotate(v, "machine_on", &[k]);
            v
        })
        .collect();

    let s: Vec<VarId> = jobs
        .iter()
        .map(|job| {
            let v = ir.continuous(format!("s_{}", job.id), job.r as f64, job.latest_start() as f64);
            ir.annotate(v, "start", &[job.id]);
            v
        })
        .collect();

    let mut z = vec![vec![None; n + 1]; n + 1];
    let mut pwl = vec![vec![None; n + 1]; n + 1];
    let mut objective = LinExpr::new();
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            let ub = bm(PairBound::GapUpper, i, j);
            let v = ir.continuous(format!("z_{i}_{j}"), 0.0, ub);
            ir.annotate(v, "gap", &[i, j]);
            let term = linearize_pwl(&mut ir, &inst.energy_function, v, ub, opts.pwl, &format!("{i}_{j}"));
            objective.extend(&term.objective);
            z[i][j] = Some(v);
            pwl[i][j] = Some(term);
        }
    }
    let zv = |i: usize, j: usize| z[i][j].expect("modelled gap");
    for &ok in &o {
        objective.add(ok, inst.c_onoff);
    }

    // each job on exactly one machine
    for j in 1..=n {
        let e = (1..=m).fold(LinExpr::new(), |e, k| e.term(a[j - 1][k - 1], 1.0));
        ir.constrain(format!("assign_{j}"), e, Relation::Eq, 1.0);
    }
    // one successor / one predecessor on the assigned machine, none elsewhere
    for j in 1..=n {
        for k in 1..=m {
            let mut succ = LinExpr::new().term(a[j - 1][k - 1], -1.0);
            for t in (1..=end).filter(|&t| t != j) {
                succ.add(xv(k, j, t), 1.0);
            }
            ir.constrain(format!("succ_{j}_{k}"), succ, Relation::Eq, 0.0);
            let mut pred = LinExpr::new().term(a[j - 1][k - 1], -1.0);
            for t in (0..=n).filter(|&t| t != j) {
                pred.add(xv(k, t, j), 1.0);
            }
            ir.constrain(format!("pred_{j}_{k}"), pred, Relation::Eq, 0.0);
        }
    }
    // dummies: one successor of the start, one predecessor of the end
    for k in 1..=m {
        let e = (1..=end).fold(LinExpr::new(), |e, j| e.term(xv(k, 0, j), 1.0));
        ir.constrain(format!("dstart_{k}"), e, Relation::Eq, 1.0);
        let e = (0..=n).fold(LinExpr::new(), |e, i| e.term(xv(k, i, end), 1.0));
        ir.constrain(format!("dend_{k}"), e, Relation::Eq, 1.0);
    }
    // windows are the bounds of s_j
    // neighbours do not overlap
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            let mij = bm(PairBound::Overlap, i, j);
            for k in 1..=m {
                // s_i + p_i + z_ij <= s_j + M (1 - x_ijk)
                let e = LinExpr::new()
                    .term(s[i - 1], 1.0)
                    .term(zv(i, j), 1.0)
                    .term(s[j - 1], -1.0)
                    .term(xv(k, i, j), mij);
                ir.constrain(
                    format!("ovl_{i}_{j}_{k}"),
                    e,
                    Relation::Le,
                    mij - jobs[i - 1].p as f64,
                );
            }
        }
    }
    // gap linking
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            let p_i = jobs[i - 1].p as f64;
            let up = bm(PairBound::GapUpper, i, j);
            let lo = bm(PairBound::Overlap, i, j);
            let mut e = LinExpr::new()
                .term(s[j - 1], 1.0)
                .term(s[i - 1], -1.0)
                .term(zv(i, j), -1.0);
            for k in 1..=m {
                e.add(xv(k, i, j), up);
            }
            ir.constrain(format!("zub_{i}_{j}"), e, Relation::Le, up + p_i);

            let mut e = LinExpr::new()
                .term(s[j - 1], 1.0)
                .term(s[i - 1], -1.0)
                .term(zv(i, j), -1.0);
            for k in 1..=m {
                e.add(xv(k, i, j), -lo);
            }
            ir.constrain(format!("zlb_{i}_{j}"), e, Relation::Ge, p_i - lo);

            let mut e = LinExpr::new().term(zv(i, j), 1.0);
            for k in 1..=m {
                e.add(xv(k, i, j), -up);
            }
            ir.constrain(format!("zzero_{i}_{j}"), e, Relation::Le, 0.0);
        }
    }
    // machine on unless the dummy start links straight to the dummy end
    for k in 1..=m {
        let e = LinExpr::new().term(o[k - 1], 1.0).term(xv(k, 0, end), 1.0);
        ir.constrain(format!("on_{k}"), e, Relation::Ge, 1.0);
    }

    if opts.symmetry {
        for k in 1..m {
            let e = LinExpr::new().term(o[k - 1], 1.0).term(o[k], -1.0);
            ir.constrain(format!("symm_{k}"), e, Relation::Ge, 0.0);
        }
        for j in 1..=m.min(n) {
            let e = (1..=j).fold(LinExpr::new(), |e, k| e.term(a[j - 1][k - 1], 1.0));
            ir.constrain(format!("symj_{j}"), e, Relation::Eq, 1.0);
        }
    }

    let start_end = if opts.horizon_fill {
        let mut se = Vec::with_capacity(m);
        for k in 1..=m {
            let st = ir.continuous(format!("start_{k}"), 0.0, h);
            ir.annotate(st, "machine_start", &[k]);
            let en = ir.continuous(format!("end_{k}"), 0.0, h);
            ir.annotate(en, "machine_end", &[k]);
            se.push((st, en));
        }
        for k in 1..=m {
            let (st, en) = se[k - 1];
            for j in 1..=n {
                let p_j = jobs[j - 1].p as f64;
                // x_0jk = 1  =>  start_k = s_j
                let xs = xv(k, 0, j);
                ir.constrain(
                    format!("fsa_{j}_{k}"),
                    LinExpr::new().term(st, 1.0).term(s[j - 1], -1.0).term(xs, h),
                    Relation::Le,
                    h,
                );
                ir.constrain(
                    format!("fsb_{j}_{k}"),
                    LinExpr::new().term(s[j - 1], 1.0).term(st, -1.0).term(xs, h),
                    Relation::Le,
                    h,
                );
                // x_j,n+1,k = 1  =>  end_k = H - (s_j + p_j)
                let xe = xv(k, j, end);
                ir.constrain(
                    format!("fea_{j}_{k}"),
                    LinExpr::new().term(en, 1.0).term(s[j - 1], 1.0).term(xe, h),
                    Relation::Le,
                    2.0 * h - p_j,
                );
                ir.constrain(
                    format!("feb_{j}_{k}"),
                    LinExpr::new().term(en, -1.0).term(s[j - 1], -1.0).term(xe, h),
                    Relation::Le,
                    p_j,
                );
            }
        }
        let total_p: f64 = jobs.iter().map(|j| j.p as f64).sum();
        let mut e = LinExpr::new();
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                e.add(zv(i, j), 1.0);
            }
        }
        for k in 1..=m {
            let (st, en) = se[k - 1];
            e.add(st, 1.0);
            e.add(en, 1.0);
            e.add(o[k - 1], -h);
        }
        ir.constrain("fill".into(), e, Relation::Eq, -total_p);
        Some(se)
    } else {
        None
    };

    ir.objective = objective;
    Ok(RelativeOrderModel {
        ir,
        n,
        m,
        a,
        x,
        o,
        s,
        z,
        pwl,
        start_end,
    })
}

#[derive(Debug, Clone, Copy)]
enum PairBound {
    /// Bounds `s_i + p_i - s_j` (overlap row, lower gap link).
    Overlap,
    /// Bounds `s_j - s_i - p_i` (upper gap link, gap upper bound).
    GapUpper,
}

fn pair_big_m(inst: &Instance, mode: BigMMode, kind: PairBound, i: usize, j: usize) -> f64 {
    match (mode, kind) {
        (BigMMode::Horizon, _) => big_m(inst),
        (BigMMode::Tightened, PairBound::Overlap) => big_m_pair(inst, j, i),
        (BigMMode::Tightened, PairBound::GapUpper) => big_m_pair(inst, i, j),
    }
}

impl RelativeOrderModel {
    /// Variable values representing a known feasible schedule.
    ///
    /// Machines are relabelled in order of first use by job id, which keeps
    /// the schedule's cost and satisfies the symmetry rows.
    pub fn encode(&self, inst: &Instance, ev: &EvaluatedSolution) -> Vec<f64> {
        let mut x = vec![0.0; self.ir.variables.len()];
        let h = inst.horizon() as f64;
        let end = self.n + 1;
        let mut scheds = ev.machines.clone();
        scheds.sort_by_key(|ms| ms.jobs.iter().min().copied());

        for (slot, ms) in scheds.iter().enumerate() {
            let k = slot + 1;
            x[self.o[k - 1].0] = 1.0;
            let chain: Vec<usize> = std::iter::once(0)
                .chain(ms.jobs.iter().copied())
                .chain(std::iter::once(end))
                .collect();
            for w in chain.windows(2) {
                x[self.x[k - 1][w[0]][w[1]].expect("pair").0] = 1.0;
            }
            for &j in &ms.jobs {
                x[self.a[j - 1][k - 1].0] = 1.0;
            }
            if let Some(se) = &self.start_end {
                let first = ms.jobs[0];
                let last = *ms.jobs.last().expect("non-empty machine");
                x[se[k - 1].0 .0] = ev.solution.start[first - 1];
                x[se[k - 1].1 .0] =
                    h - ev.solution.start[last - 1] - inst.jobs[last - 1].p as f64;
            }
        }
        for k in scheds.len() + 1..=self.m {
            x[self.x[k - 1][0][end].expect("pair").0] = 1.0;
        }
        for (j, &sv) in self.s.iter().enumerate() {
            x[sv.0] = ev.solution.start[j];
        }
        for i in 1..=self.n {
            for j in (1..=self.n).filter(|&j| j != i) {
                let gap = if ev.pred[j - 1] == Some(i) {
                    ev.solution.start[j - 1] - ev.solution.start[i - 1] - inst.jobs[i - 1].p as f64
                } else {
                    0.0
                };
                self.pwl[i][j].as_ref().expect("term").encode(gap, &mut x);
                debug_assert_eq!(x[self.z[i][j].expect("gap").0], gap);
            }
        }
        x
    }
}
