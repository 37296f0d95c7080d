//! Exact MILP encoding of a (possibly discontinuous) piecewise-linear cost.
//!
//! Each piece gets a selector binary; the gap variable is split into per-piece
//! parts that are forced to zero unless their piece is selected. Pieces are
//! closed intervals inside the model, so at a breakpoint both neighbours are
//! admissible and minimization picks the cheaper one. Energy functions only
//! jump downwards, so that is always the right-hand piece, matching the
//! left-closed/right-open evaluation rule.

use serde::{Deserialize, Serialize};

use super::ir::{LinExpr, ModelIR, Relation, VarId};
use crate::energy::EnergyFunction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PwlMethod {
    /// Selector binary plus one continuous part per piece.
    #[default]
    SegmentBinary,
    /// Selector binary plus convex-combination weights of each piece's ends.
    LambdaWithBinaries,
}

/// A piece clipped to the gap variable's range `[0, big_m]`.
#[derive(Debug, Clone, Copy)]
struct Clipped {
    lo: f64,
    hi: f64,
    slope: f64,
    intercept: f64,
}

#[derive(Debug, Clone)]
enum PieceVars {
    Segment { select: VarId, part: VarId },
    Lambda { select: VarId, at_lo: VarId, at_hi: VarId },
}

/// Variables added for one linearized term; used to encode known gaps.
#[derive(Debug, Clone)]
pub struct PwlTerm {
    pub objective: LinExpr,
    gap: VarId,
    pieces: Vec<(Clipped, PieceVars)>,
    single_slope: Option<f64>,
}

fn clipped_pieces(f: &EnergyFunction, big_m: f64) -> Vec<Clipped> {
    f.pieces()
        .iter()
        .enumerate()
        .filter(|(i, p)| *i == 0 || p.lo <= big_m)
        .map(|(_, p)| Clipped {
            lo: p.lo.min(big_m),
            hi: p.hi.min(big_m),
            slope: p.slope,
            intercept: p.intercept,
        })
        .collect()
}

/// Adds the encoding of `f(gap)` to `ir` and returns its objective term.
///
/// `gap` must be bounded to `[0, big_m]` by the caller. Names of the auxiliary
/// variables and rows are derived from `tag`.
pub fn linearize_pwl(
    ir: &mut ModelIR,
    f: &EnergyFunction,
    gap: VarId,
    big_m: f64,
    method: PwlMethod,
    tag: &str,
) -> PwlTerm {
    let pieces = clipped_pieces(f, big_m);
    if pieces.len() == 1 {
        let slope = pieces[0].slope;
        return PwlTerm {
            objective: LinExpr::new().term(gap, slope),
            gap,
            pieces: Vec::new(),
            single_slope: Some(slope),
        };
    }

    let mut objective = LinExpr::new();
    let mut choose = LinExpr::new();
    let mut split = LinExpr::new().term(gap, -1.0);
    let mut vars = Vec::with_capacity(pieces.len());
    for (q, pc) in pieces.iter().enumerate() {
        let q1 = q + 1;
        let select = ir.binary(format!("pb_{tag}_{q1}"));
        ir.annotate(select, "pwl_select", &[q1]);
        choose.add(select, 1.0);
        objective.add(select, pc.intercept);
        match method {
            PwlMethod::SegmentBinary => {
                let part = ir.continuous(format!("pw_{tag}_{q1}"), 0.0, pc.hi);
                ir.annotate(part, "pwl_part", &[q1]);
                split.add(part, 1.0);
                objective.add(part, pc.slope);
                ir.constrain(
                    format!("pwlo_{tag}_{q1}"),
                    LinExpr::new().term(part, 1.0).term(select, -pc.lo),
                    Relation::Ge,
                    0.0,
                );
                ir.constrain(
                    format!("pwhi_{tag}_{q1}"),
                    LinExpr::new().term(part, 1.0).term(select, -pc.hi),
                    Relation::Le,
                    0.0,
                );
                vars.push((*pc, PieceVars::Segment { select, part }));
            }
            PwlMethod::LambdaWithBinaries => {
                let at_lo = ir.continuous(format!("pl_{tag}_{q1}"), 0.0, 1.0);
                let at_hi = ir.continuous(format!("pu_{tag}_{q1}"), 0.0, 1.0);
                ir.annotate(at_lo, "pwl_lambda_lo", &[q1]);
                ir.annotate(at_hi, "pwl_lambda_hi", &[q1]);
                split.add(at_lo, pc.lo);
                split.add(at_hi, pc.hi);
                // The selector's intercept term already covers the constant.
                objective.add(at_lo, pc.slope * pc.lo);
                objective.add(at_hi, pc.slope * pc.hi);
                ir.constrain(
                    format!("pwcc_{tag}_{q1}"),
                    LinExpr::new().term(at_lo, 1.0).term(at_hi, 1.0).term(select, -1.0),
                    Relation::Eq,
                    0.0,
                );
                vars.push((*pc, PieceVars::Lambda { select, at_lo, at_hi }));
            }
        }
    }
    ir.constrain(format!("pwone_{tag}"), choose, Relation::Eq, 1.0);
    ir.constrain(format!("pwsum_{tag}"), split, Relation::Eq, 0.0);
    PwlTerm {
        objective,
        gap,
        pieces: vars,
        single_slope: None,
    }
}

impl PwlTerm {
    /// Writes the auxiliary values encoding `gap` into `x`, choosing the
    /// piece that owns `gap` (the right-hand one at a breakpoint).
    pub fn encode(&self, gap: f64, x: &mut [f64]) {
        x[self.gap.0] = gap;
        if self.single_slope.is_some() {
            return;
        }
        let q = self
            .pieces
            .iter()
            .rposition(|(pc, _)| pc.lo <= gap)
            .unwrap_or(0);
        for (i, (pc, vars)) in self.pieces.iter().enumerate() {
            let on = i == q;
            match *vars {
                PieceVars::Segment { select, part } => {
                    x[select.0] = if on { 1.0 } else { 0.0 };
                    x[part.0] = if on { gap } else { 0.0 };
                }
                PieceVars::Lambda { select, at_lo, at_hi } => {
                    x[select.0] = if on { 1.0 } else { 0.0 };
                    let (wl, wh) = if !on {
                        (0.0, 0.0)
                    } else if pc.hi > pc.lo {
                        let t = (gap - pc.lo) / (pc.hi - pc.lo);
                        (1.0 - t, t)
                    } else {
                        (1.0, 0.0)
                    };
                    x[at_lo.0] = wl;
                    x[at_hi.0] = wh;
                }
            }
        }
    }
}
