//! Exact oracle for small instances.
//!
//! Start times are restricted to a grid of step `1/grid_divisor`. For integer
//! job data and an energy function with integer breakpoints this loses
//! nothing: once the order on each machine and the piece used by every gap
//! are fixed, the remaining timing problem is a linear program over
//! difference constraints, whose vertices are integral.
//!
//! The timing DP works on completion-time profiles: `F[c]` is the least idle
//! energy of a job prefix whose last job completes at grid point `c`.
//! Appending a job with processing time `p` gives
//! `F'[c] = min_{c'} F[c'] + f((c - p - c') / div)`, evaluated per piece of
//! `f` with a sliding-window minimum.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SolveResult, SolveStatus};
use crate::problem::{Instance, Solution};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance has {n} jobs, the oracle accepts at most {max}")]
    TooLarge { n: usize, max: usize },
    #[error("grid divisor must be at least 1")]
    BadGrid,
    #[error("invalid sequence: {0}")]
    Sequence(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    /// Every assignment, every order on each machine.
    #[default]
    Enumerate,
    /// DP over job subsets per machine, then over partitions into machines.
    SubsetDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub max_jobs: usize,
    /// Start times are multiples of `1 / grid_divisor`.
    pub grid_divisor: u32,
    /// Enumerate assignments only up to relabelling of machines.
    pub symmetry_reduction: bool,
    pub method: OracleMethod,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_jobs: 8,
            grid_divisor: 1,
            symmetry_reduction: true,
            method: OracleMethod::Enumerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub idle: f64,
    /// Start times in sequence order.
    pub start: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct GridPiece {
    /// Gap range in grid units, inclusive; `hi == usize::MAX` when unbounded.
    lo: usize,
    hi: usize,
    slope: f64,
    intercept: f64,
}

/// Instance data converted to grid units.
struct Grid {
    div: f64,
    len: usize,
    pieces: Vec<GridPiece>,
    p: Vec<usize>,
    /// Completion-time window per job.
    window: Vec<(usize, usize)>,
}

impl Grid {
    fn new(inst: &Instance, divisor: u32) -> Result<Self, OracleError> {
        if divisor == 0 {
            return Err(OracleError::BadGrid);
        }
        let div = divisor as f64;
        let units = |t: i64| (t.max(0) as usize) * divisor as usize;
        let pieces = inst
            .energy_function
            .pieces()
            .iter()
            .filter_map(|pc| {
                let lo = (pc.lo * div - 1e-9).ceil().max(0.0) as usize;
                let hi = if pc.hi.is_finite() {
                    let h = (pc.hi * div - 1e-9).ceil() as usize;
                    h.checked_sub(1)?
                } else {
                    usize::MAX
                };
                (lo <= hi).then_some(GridPiece {
                    lo,
                    hi,
                    slope: pc.slope / div,
                    intercept: pc.intercept,
                })
            })
            .collect();
        Ok(Self {
            div,
            len: units(inst.horizon()) + 1,
            pieces,
            p: inst.jobs.iter().map(|j| units(j.p)).collect(),
            window: inst.jobs.iter().map(|j| (units(j.r + j.p), units(j.d))).collect(),
        })
    }

    fn first(&self, job: usize) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.len];
        let (lo, hi) = self.window[job];
        for v in out.iter_mut().take(hi.min(self.len - 1) + 1).skip(lo) {
            *v = 0.0;
        }
        out
    }

    fn gap_cost(&self, g: usize) -> f64 {
        self.pieces
            .iter()
            .rev()
            .find(|pc| pc.lo <= g)
            .map_or(f64::INFINITY, |pc| pc.intercept + pc.slope * g as f64)
    }

    /// Profile after appending `job` to a prefix with profile `prev`.
    fn append(&self, prev: &[f64], job: usize) -> Vec<f64> {
        let p = self.p[job];
        let (wlo, whi) = self.window[job];
        let mut out = vec![f64::INFINITY; self.len];
        if p >= self.len {
            return out;
        }
        let mut dq: VecDeque<(usize, f64)> = VecDeque::new();
        for pc in &self.pieces {
            dq.clear();
            let mut next = 0usize;
            // `a` is the start of the appended job
            for a in 0..self.len - p {
                let c = a + p;
                if a >= pc.lo {
                    let right = a - pc.lo;
                    while next <= right {
                        let w = prev[next];
                        if w.is_finite() {
                            let w = w - pc.slope * next as f64;
                            while dq.back().is_some_and(|&(_, b)| b >= w) {
                                dq.pop_back();
                            }
                            dq.push_back((next, w));
                        }
                        next += 1;
                    }
                }
                let left = a.saturating_sub(pc.hi);
                while dq.front().is_some_and(|&(i, _)| i < left) {
                    dq.pop_front();
                }
                if c < wlo || c > whi {
                    continue;
                }
                if let Some(&(_, w)) = dq.front() {
                    let v = pc.intercept + pc.slope * a as f64 + w;
                    if v < out[c] {
                        out[c] = v;
                    }
                }
            }
        }
        out
    }

    fn best(profile: &[f64]) -> Option<(usize, f64)> {
        profile
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .fold(None, |acc: Option<(usize, f64)>, (c, &v)| match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((c, v)),
            })
    }

    /// Least idle energy and start times for a fixed order of job indices.
    fn timing(&self, seq: &[usize]) -> Option<Timing> {
        if seq.is_empty() {
            return Some(Timing {
                idle: 0.0,
                start: Vec::new(),
            });
        }
        let mut profiles = vec![self.first(seq[0])];
        for &j in &seq[1..] {
            let next = self.append(profiles.last().expect("non-empty"), j);
            profiles.push(next);
        }
        let (mut c, idle) = Self::best(profiles.last().expect("non-empty"))?;
        let mut completion = vec![0usize; seq.len()];
        completion[seq.len() - 1] = c;
        for t in (1..seq.len()).rev() {
            let target = profiles[t][c];
            let a = c - self.p[seq[t]];
            let prev = &profiles[t - 1];
            // earliest predecessor completion reproducing the value
            let cp = (0..=a)
                .filter(|&cp| prev[cp].is_finite())
                .find(|&cp| {
                    let v = prev[cp] + self.gap_cost(a - cp);
                    (v - target).abs() <= 1e-9 * target.abs().max(1.0)
                })
                .expect("DP value has a witness");
            completion[t - 1] = cp;
            c = cp;
        }
        let start = seq
            .iter()
            .zip(&completion)
            .map(|(&j, &c)| (c - self.p[j]) as f64 / self.div)
            .collect();
        Some(Timing { idle, start })
    }
}

fn index_sequence(inst: &Instance, seq: &[usize]) -> Result<Vec<usize>, OracleError> {
    let mut seen = vec![false; inst.n()];
    seq.iter()
        .map(|&id| {
            let idx = inst
                .jobs
                .iter()
                .position(|j| j.id == id)
                .ok_or_else(|| OracleError::Sequence(format!("unknown job {id}")))?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(OracleError::Sequence(format!("job {id} repeated")));
            }
            Ok(idx)
        })
        .collect()
}

/// Least idle energy of processing the jobs `seq` (ids) in this order on one
/// machine, on the integer time grid. `None` when no timing fits the windows.
pub fn dp_timing(inst: &Instance, seq: &[usize]) -> Result<Option<Timing>, OracleError> {
    dp_timing_on_grid(inst, seq, 1)
}

pub fn dp_timing_on_grid(inst: &Instance, seq: &[usize], divisor: u32) -> Result<Option<Timing>, OracleError> {
    let idx = index_sequence(inst, seq)?;
    Ok(Grid::new(inst, divisor)?.timing(&idx))
}

/// Least idle energy per job subset (bit mask over job indices) together
/// with a best order.
struct SubsetTable {
    cost: Vec<f64>,
    order: Vec<Vec<usize>>,
}

fn subsets_by_enumeration(grid: &Grid, n: usize) -> SubsetTable {
    let size = 1usize << n;
    let mut table = SubsetTable {
        cost: vec![f64::INFINITY; size],
        order: vec![Vec::new(); size],
    };
    table.cost[0] = 0.0;
    let mut seq = Vec::with_capacity(n);
    for j in 0..n {
        seq.push(j);
        let prof = grid.first(j);
        dfs(grid, n, &mut seq, 1 << j, prof, &mut table);
        seq.pop();
    }
    table
}

fn dfs(grid: &Grid, n: usize, seq: &mut Vec<usize>, mask: usize, prof: Vec<f64>, table: &mut SubsetTable) {
    let Some((_, v)) = Grid::best(&prof) else {
        return;
    };
    if v < table.cost[mask] {
        table.cost[mask] = v;
        table.order[mask] = seq.clone();
    }
    for j in 0..n {
        if mask & (1 << j) != 0 {
            continue;
        }
        let next = grid.append(&prof, j);
        seq.push(j);
        dfs(grid, n, seq, mask | (1 << j), next, table);
        seq.pop();
    }
}

fn subsets_by_dp(grid: &Grid, n: usize) -> SubsetTable {
    let size = 1usize << n;
    // profiles[mask][last]
    let mut profiles: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; n]; size];
    for j in 0..n {
        let p = grid.first(j);
        if Grid::best(&p).is_some() {
            profiles[1 << j][j] = Some(p);
        }
    }
    for mask in 1..size {
        for last in 0..n {
            let Some(prof) = profiles[mask][last].take() else { continue };
            for j in (0..n).filter(|&j| mask & (1 << j) == 0) {
                let next = grid.append(&prof, j);
                if Grid::best(&next).is_none() {
                    continue;
                }
                let slot = &mut profiles[mask | (1 << j)][j];
                match slot {
                    Some(cur) => cur.iter_mut().zip(&next).for_each(|(a, &b)| *a = a.min(b)),
                    None => *slot = Some(next),
                }
            }
            profiles[mask][last] = Some(prof);
        }
    }
    let mut table = SubsetTable {
        cost: vec![f64::INFINITY; size],
        order: vec![Vec::new(); size],
    };
    table.cost[0] = 0.0;
    for mask in 1..size {
        let mut best: Option<(usize, usize, f64)> = None;
        for (last, prof) in profiles[mask].iter().enumerate() {
            if let Some((c, v)) = prof.as_deref().and_then(Grid::best) {
                if best.map_or(true, |(_, _, b)| v < b) {
                    best = Some((last, c, v));
                }
            }
        }
        if let Some((last, c, v)) = best {
            table.cost[mask] = v;
            table.order[mask] = backtrack_order(grid, &profiles, mask, last, c);
        }
    }
    table
}

fn backtrack_order(grid: &Grid, profiles: &[Vec<Option<Vec<f64>>>], mask: usize, last: usize, c: usize) -> Vec<usize> {
    let mut order = vec![last];
    let (mut mask, mut last, mut c) = (mask, last, c);
    while mask.count_ones() > 1 {
        let target = profiles[mask][last].as_ref().expect("reachable state")[c];
        let rest = mask & !(1 << last);
        let a = c - grid.p[last];
        let step = (0..profiles[rest].len()).find_map(|j| {
            let prof = profiles[rest].get(j)?.as_ref()?;
            (0..=a).find_map(|cp| {
                let v = prof[cp] + grid.gap_cost(a - cp);
                (v.is_finite() && (v - target).abs() <= 1e-9 * target.abs().max(1.0)).then_some((j, cp))
            })
        });
        let (j, cp) = step.expect("DP value has a witness");
        order.push(j);
        mask = rest;
        last = j;
        c = cp;
    }
    order.reverse();
    order
}

/// Restricted-growth strings: job 0 on machine 0, each later job on a used
/// machine or the next fresh one.
fn for_each_assignment(n: usize, m: usize, symmetric: bool, mut visit: impl FnMut(&[usize])) {
    let mut a = vec![0usize; n];
    fn rec(a: &mut Vec<usize>, t: usize, used: usize, m: usize, symmetric: bool, visit: &mut dyn FnMut(&[usize])) {
        if t == a.len() {
            visit(a);
            return;
        }
        let limit = if symmetric { (used + 1).min(m) } else { m };
        for k in 0..limit {
            a[t] = k;
            rec(a, t + 1, used.max(k + 1), m, symmetric, visit);
        }
    }
    rec(&mut a, 0, 0, m, symmetric, &mut visit);
}

/// Minimum over partitions of the job set into at most `m` machines of
/// `Σ (subset idle + c_onoff)`; returns the subsets of the best partition.
fn best_partition(table: &SubsetTable, n: usize, m: usize, c_onoff: f64) -> Option<(f64, Vec<usize>)> {
    let full = (1usize << n) - 1;
    // g[k][mask]: best cover of mask with at most k machines
    let mut g = vec![vec![f64::INFINITY; full + 1]; m + 1];
    let mut choice = vec![vec![0usize; full + 1]; m + 1];
    for row in g.iter_mut() {
        row[0] = 0.0;
    }
    for k in 1..=m {
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            // submasks of `rest`, each joined with the lowest job
            let mut sub = rest;
            loop {
                let part = sub | low;
                let v = table.cost[part] + c_onoff + g[k - 1][mask ^ part];
                if v < g[k][mask] {
                    g[k][mask] = v;
                    choice[k][mask] = part;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
    }
    if !g[m][full].is_finite() {
        return None;
    }
    let mut parts = Vec::new();
    let (mut k, mut mask) = (m, full);
    while mask != 0 {
        let part = choice[k][mask];
        parts.push(part);
        mask ^= part;
        k -= 1;
    }
    parts.sort_by_key(|p| p.trailing_zeros());
    Some((g[m][full], parts))
}

/// Exact optimum of `idle + c_onoff · used machines` by exhaustive search.
pub fn brute_force(inst: &Instance, cfg: &OracleConfig) -> Result<SolveResult, OracleError> {
    let started = Instant::now();
    let n = inst.n();
    if n > cfg.max_jobs {
        return Err(OracleError::TooLarge { n, max: cfg.max_jobs });
    }
    let grid = Grid::new(inst, cfg.grid_divisor)?;
    let m = inst.machines.min(n.max(1));
    let table = match cfg.method {
        OracleMethod::Enumerate => subsets_by_enumeration(&grid, n),
        OracleMethod::SubsetDp => subsets_by_dp(&grid, n),
    };

    let parts: Option<Vec<usize>> = if n == 0 {
        Some(Vec::new())
    } else {
        match cfg.method {
            OracleMethod::Enumerate => {
                let mut best: Option<(f64, Vec<usize>)> = None;
                let mut masks = vec![0usize; m];
                for_each_assignment(n, m, cfg.symmetry_reduction, |a| {
                    masks.iter_mut().for_each(|x| *x = 0);
                    for (j, &k) in a.iter().enumerate() {
                        masks[k] |= 1 << j;
                    }
                    let cost: f64 = masks
                        .iter()
                        .filter(|&&s| s != 0)
                        .map(|&s| table.cost[s] + inst.c_onoff)
                        .sum();
                    if cost.is_finite() && best.as_ref().map_or(true, |(b, _)| cost < *b) {
                        best = Some((cost, masks.iter().copied().filter(|&s| s != 0).collect()));
                    }
                });
                best.map(|(_, p)| p)
            }
            OracleMethod::SubsetDp => best_partition(&table, n, m, inst.c_onoff).map(|(_, p)| p),
        }
    };

    let runtime_s = || started.elapsed().as_secs_f64();
    let Some(mut parts) = parts else {
        return Ok(SolveResult {
            status: SolveStatus::Infeasible,
            objective: None,
            bound: None,
            gap: None,
            runtime_s: runtime_s(),
            solution: None,
            message: None,
        });
    };
    parts.sort_by_key(|p| p.trailing_zeros());
    let mut assignment = vec![0; n];
    let mut start = vec![0.0; n];
    let mut objective = 0.0;
    for (k, &part) in parts.iter().enumerate() {
        let order = &table.order[part];
        let t = grid.timing(order).expect("subset has a feasible order");
        objective += t.idle + inst.c_onoff;
        for (&j, &s) in order.iter().zip(&t.start) {
            assignment[j] = k + 1;
            start[j] = s;
        }
    }
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        objective: Some(objective),
        bound: Some(objective),
        gap: Some(0.0),
        runtime_s: runtime_s(),
        solution: Some(Solution { assignment, start }),
        message: None,
    })
}
