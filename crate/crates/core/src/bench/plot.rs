//! Long-format CSV for external plotting tools.

use std::fmt::Write as _;
use std::str::FromStr;

use super::aggregate::known_infeasible;
use super::{BenchError, ResultRow};
use crate::energy::EnergyFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    BoxplotRuntimes,
    EnergyFunctionCurve,
}

impl FromStr for PlotKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "boxplot-runtimes" => Ok(PlotKind::BoxplotRuntimes),
            "energy-function-curve" => Ok(PlotKind::EnergyFunctionCurve),
            other => Err(BenchError::UnknownPlot(other.into())),
        }
    }
}

/// Runtime samples on instances not known to be infeasible, grouped as
/// `model[toggles] n=.. m=..`. Output: `group,value`.
pub fn emit_plot_data(rows: &[ResultRow]) -> String {
    let infeasible = known_infeasible(rows);
    let mut out = String::from("group,value\n");
    let mut sorted: Vec<&ResultRow> = rows.iter().filter(|r| !infeasible.contains(&r.instance_id)).collect();
    sorted.sort_by(|a, b| (a.n, a.m, a.key()).cmp(&(b.n, b.m, b.key())));
    for r in sorted {
        let _ = writeln!(out, "{} n={} m={},{}", r.key(), r.n, r.m, r.runtime_s);
    }
    out
}

/// Samples each labelled function at the given idle lengths.
/// Output: `group,delta,value`.
pub fn emit_energy_curve(functions: &[(String, EnergyFunction)], deltas: &[f64]) -> Result<String, BenchError> {
    let mut out = String::from("group,delta,value\n");
    for (label, f) in functions {
        for &d in deltas {
            let _ = writeln!(out, "{label},{d},{}", f.evaluate(d)?);
        }
    }
    Ok(out)
}
