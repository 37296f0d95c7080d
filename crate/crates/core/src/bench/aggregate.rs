//! Per-cell aggregation and markdown tables.
//!
//! Everything here is a pure function of the result rows, so re-aggregating
//! a saved CSV reproduces the tables byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::{BenchError, ResultRow};
use crate::solve::{objectives_agree, SolveStatus};

/// Identifies one solver configuration, e.g. `relative[sym+fill]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigKey {
    pub model: String,
    pub toggles: String,
}

impl fmt::Display for ConfigKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.model, self.toggles)
    }
}

impl std::str::FromStr for ConfigKey {
    type Err = BenchError;

    /// Accepts `model[toggles]` or a bare `model` (toggles `none`).
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let s = s.trim();
        let (model, toggles) = match s.split_once('[') {
            Some((m, rest)) => match rest.strip_suffix(']') {
                Some(t) => (m, t),
                None => return Err(BenchError::Spec(format!("bad configuration {s:?}"))),
            },
            None => (s, "none"),
        };
        if model.is_empty() {
            return Err(BenchError::Spec(format!("bad configuration {s:?}")));
        }
        Ok(ConfigKey {
            model: model.into(),
            toggles: toggles.into(),
        })
    }
}

/// Table 1 has one timeout column per model; Table 2 splits it by the
/// feasibility of the instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableShape {
    Merged,
    #[default]
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub m: usize,
    pub model: String,
    pub toggles: String,
    pub instances: usize,
    pub count_infeasible: usize,
    pub count_timeout_infeasible: usize,
    pub count_timeout_feasible: usize,
    pub mean_runtime_infeasible: Option<f64>,
    pub mean_runtime_feasible: Option<f64>,
    /// Fraction, averaged over rows that found some solution.
    pub mean_gap: Option<f64>,
    pub errors: usize,
}

impl AggregateRow {
    pub fn key(&self) -> ConfigKey {
        ConfigKey {
            model: self.model.clone(),
            toggles: self.toggles.clone(),
        }
    }

    pub fn count_timeout(&self) -> usize {
        self.count_timeout_infeasible + self.count_timeout_feasible
    }
}

/// Instances proven infeasible by any configuration in `rows`.
pub fn known_infeasible(rows: &[ResultRow]) -> HashSet<String> {
    rows.iter()
        .filter(|r| r.status == SolveStatus::Infeasible)
        .map(|r| r.instance_id.clone())
        .collect()
}

/// Configurations in order of first appearance.
pub fn config_order(rows: &[ResultRow]) -> Vec<ConfigKey> {
    let mut seen = HashSet::new();
    rows.iter().map(|r| r.key()).filter(|k| seen.insert(k.clone())).collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// One row per `(n, m, configuration)`. An instance counts as infeasible when
/// any configuration proved it so; undecided instances count as feasible.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let infeasible = known_infeasible(rows);
    let mut groups: BTreeMap<(usize, usize, ConfigKey), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.m, r.key())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, m, key), rs)| {
            let ids: BTreeSet<&str> = rs.iter().map(|r| r.instance_id.as_str()).collect();
            let is_inf = |r: &&&ResultRow| infeasible.contains(&r.instance_id);
            let (inf, feas): (Vec<&ResultRow>, Vec<&ResultRow>) = rs.iter().partition(|r| is_inf(&r));
            let gaps: Vec<f64> = rs.iter().filter(|r| r.objective.is_some()).filter_map(|r| r.gap).collect();
            AggregateRow {
                n,
                m,
                model: key.model,
                toggles: key.toggles,
                instances: ids.len(),
                count_infeasible: ids.iter().filter(|id| infeasible.contains(**id)).count(),
                count_timeout_infeasible: inf.iter().filter(|r| r.status.is_timeout()).count(),
                count_timeout_feasible: feas.iter().filter(|r| r.status.is_timeout()).count(),
                mean_runtime_infeasible: mean(&inf.iter().map(|r| r.runtime_s).collect::<Vec<_>>()),
                mean_runtime_feasible: mean(&feas.iter().map(|r| r.runtime_s).collect::<Vec<_>>()),
                mean_gap: mean(&gaps),
                errors: rs.iter().filter(|r| r.status == SolveStatus::Error).count(),
            }
        })
        .collect()
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(String::new, |v| format!("{v:.digits$}"))
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(
        "n,m,model,toggles,instances,if,to_if,to_f,t_if,t_f,gap,errors\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.m,
            r.model,
            r.toggles,
            r.instances,
            r.count_infeasible,
            r.count_timeout_infeasible,
            r.count_timeout_feasible,
            opt(r.mean_runtime_infeasible, 3),
            opt(r.mean_runtime_feasible, 3),
            opt(r.mean_gap.map(|g| 100.0 * g), 2),
            r.errors
        );
    }
    out
}

fn cell(x: Option<f64>, digits: usize, bold: bool) -> String {
    match x {
        None => "-".into(),
        Some(v) if bold => format!("**{v:.digits$}**"),
        Some(v) => format!("{v:.digits$}"),
    }
}

/// Bold flags for the smallest value of a column when at least two
/// configurations have one. Comparison happens on the printed value.
fn fastest(values: &[Option<f64>]) -> Vec<bool> {
    let shown: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| (x * 1000.0).round())).collect();
    let present = shown.iter().flatten().count();
    let best = shown.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    shown.iter().map(|v| present >= 2 && *v == Some(best)).collect()
}

/// Markdown table with one row per `(n, m)` cell and one column group per
/// configuration, in the order of `configs`. Runtimes are in seconds, gaps
/// in percent; the faster mean runtime of each column pair is bold.
pub fn render_table(agg: &[AggregateRow], configs: &[ConfigKey], shape: TableShape) -> String {
    let mut cells: BTreeMap<(usize, usize), Vec<Option<&AggregateRow>>> = BTreeMap::new();
    for r in agg {
        let Some(pos) = configs.iter().position(|k| *k == r.key()) else { continue };
        cells.entry((r.n, r.m)).or_insert_with(|| vec![None; configs.len()])[pos] = Some(r);
    }
    let per_config: &[&str] = match shape {
        TableShape::Merged => &["#to", "t_if [s]", "t_f [s]", "gap [%]"],
        TableShape::Split => &["#to_if", "#to_f", "t_if [s]", "t_f [s]", "gap [%]"],
    };
    let mut out = String::new();
    let mut header = vec!["n".to_string(), "m".into(), "#if".into()];
    for k in configs {
        header.extend(per_config.iter().map(|c| format!("{k} {c}")));
    }
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---:|".repeat(header.len()));
    for ((n, m), row) in cells {
        let inf = row.iter().flatten().map(|r| r.count_infeasible).max().unwrap_or(0);
        let t_if = fastest(&row.iter().map(|r| r.and_then(|r| r.mean_runtime_infeasible)).collect::<Vec<_>>());
        let t_f = fastest(&row.iter().map(|r| r.and_then(|r| r.mean_runtime_feasible)).collect::<Vec<_>>());
        let mut fields = vec![n.to_string(), m.to_string(), inf.to_string()];
        for (i, r) in row.iter().enumerate() {
            let Some(r) = r else {
                fields.extend(per_config.iter().map(|_| "-".to_string()));
                continue;
            };
            match shape {
                TableShape::Merged => fields.push(r.count_timeout().to_string()),
                TableShape::Split => {
                    fields.push(r.count_timeout_infeasible.to_string());
                    fields.push(r.count_timeout_feasible.to_string());
                }
            }
            fields.push(cell(r.mean_runtime_infeasible, 3, t_if[i]));
            fields.push(cell(r.mean_runtime_feasible, 3, t_f[i]));
            fields.push(cell(r.mean_gap.map(|g| 100.0 * g), 2, false));
        }
        let _ = writeln!(out, "| {} |", fields.join(" | "));
    }
    out
}

/// Aggregates `rows` and renders them with configurations in order of
/// first appearance.
pub fn table_from_rows(rows: &[ResultRow], shape: TableShape) -> String {
    render_table(&aggregate(rows), &config_order(rows), shape)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub left: ConfigKey,
    pub right: ConfigKey,
    pub aggregate: Vec<AggregateRow>,
    pub table: String,
    /// Instances both sides solved to optimality with different objectives.
    pub disagreements: Vec<String>,
    pub both_optimal: usize,
}

fn single_config(rows: &[ResultRow], side: &str) -> Result<ConfigKey, BenchError> {
    match config_order(rows).as_slice() {
        [k] => Ok(k.clone()),
        [] => Err(BenchError::Mismatch(format!("{side} side has no rows"))),
        ks => Err(BenchError::Mismatch(format!(
            "{side} side mixes {} configurations: {}",
            ks.len(),
            ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Side-by-side comparison of two configurations run on the same instances.
/// Each side must hold exactly one configuration.
pub fn compare_models(a: &[ResultRow], b: &[ResultRow], shape: TableShape) -> Result<Comparison, BenchError> {
    let left = single_config(a, "first")?;
    let right = single_config(b, "second")?;
    if left == right {
        return Err(BenchError::Mismatch(format!("both sides are {left}")));
    }
    let ids = |rows: &[ResultRow]| rows.iter().map(|r| r.instance_id.clone()).collect::<BTreeSet<_>>();
    let (ia, ib) = (ids(a), ids(b));
    if ia != ib {
        let only_a = ia.difference(&ib).count();
        let only_b = ib.difference(&ia).count();
        return Err(BenchError::Mismatch(format!(
            "{only_a} instances only in {left}, {only_b} only in {right}"
        )));
    }
    let by_id: BTreeMap<&str, &ResultRow> = b.iter().map(|r| (r.instance_id.as_str(), r)).collect();
    let mut disagreements = Vec::new();
    let mut both_optimal = 0;
    for ra in a {
        let rb = by_id[ra.instance_id.as_str()];
        if ra.status == SolveStatus::Optimal && rb.status == SolveStatus::Optimal {
            both_optimal += 1;
            if let (Some(x), Some(y)) = (ra.objective, rb.objective) {
                if !objectives_agree(x, y) {
                    disagreements.push(format!("{}: {left} {x} vs {right} {y}", ra.instance_id));
                }
            }
        }
    }
    let all: Vec<ResultRow> = a.iter().chain(b).cloned().collect();
    let agg = aggregate(&all);
    let table = render_table(&agg, &[left.clone(), right.clone()], shape);
    Ok(Comparison {
        left,
        right,
        aggregate: agg,
        table,
        disagreements,
        both_optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, n: usize, model: &str, status: SolveStatus, obj: Option<f64>, gap: Option<f64>, t: f64) -> ResultRow {
        ResultRow {
            instance_id: id.into(),
            n,
            m: 1,
            alpha: 1.0,
            gamma: 1.0,
            model: model.into(),
            toggles: "none".into(),
            status,
            objective: obj,
            bound: None,
            gap,
            runtime_s: t,
        }
    }

    #[test]
    fn config_key_parsing() {
        let k: ConfigKey = "relative[sym+fill]".parse().unwrap();
        assert_eq!(k.to_string(), "relative[sym+fill]");
        assert_eq!("oracle".parse::<ConfigKey>().unwrap().toggles, "none");
        assert!("x[y".parse::<ConfigKey>().is_err());
    }

    #[test]
    fn counts_and_means_follow_instance_feasibility() {
        use SolveStatus::*;
        let rows = vec![
            row("i1", 5, "a", Infeasible, None, None, 1.0),
            row("i1", 5, "b", UnknownTimeout, None, None, 10.0),
            row("i2", 5, "a", Optimal, Some(4.0), Some(0.0), 2.0),
            row("i2", 5, "b", FeasibleTimeout, Some(5.0), Some(0.5), 10.0),
            row("i3", 5, "a", UnknownTimeout, None, None, 10.0),
            row("i3", 5, "b", Error, None, None, 0.0),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        let a = &agg[0];
        assert_eq!((a.instances, a.count_infeasible), (3, 1));
        assert_eq!((a.count_timeout_infeasible, a.count_timeout_feasible), (0, 1));
        assert_eq!(a.mean_runtime_infeasible, Some(1.0));
        assert_eq!(a.mean_runtime_feasible, Some(6.0));
        assert_eq!(a.mean_gap, Some(0.0));
        let b = &agg[1];
        assert_eq!(b.count_infeasible, 1);
        assert_eq!((b.count_timeout_infeasible, b.count_timeout_feasible), (1, 1));
        assert_eq!(b.mean_gap, Some(0.5));
        assert_eq!(b.errors, 1);
        assert_eq!(b.mean_runtime_feasible, Some(5.0));
    }

    #[test]
    fn table_marks_the_faster_mean() {
        use SolveStatus::*;
        let rows = vec![
            row("i1", 4, "a", Optimal, Some(1.0), Some(0.0), 1.0),
            row("i1", 4, "b", Optimal, Some(1.0), Some(0.0), 3.0),
        ];
        let t = table_from_rows(&rows, TableShape::Merged);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "| n | m | #if | a[none] #to | a[none] t_if [s] | a[none] t_f [s] | a[none] gap [%] \
             | b[none] #to | b[none] t_if [s] | b[none] t_f [s] | b[none] gap [%] |"
        );
        assert_eq!(lines[2], "| 4 | 1 | 0 | 0 | - | **1.000** | 0.00 | 0 | - | 3.000 | 0.00 |");
    }

    #[test]
    fn comparison_requires_matching_instances() {
        use SolveStatus::*;
        let a = vec![row("i1", 4, "a", Optimal, Some(1.0), Some(0.0), 1.0)];
        let b = vec![row("i1", 4, "b", Optimal, Some(2.0), Some(0.0), 1.0)];
        let c = compare_models(&a, &b, TableShape::Split).unwrap();
        assert_eq!(c.both_optimal, 1);
        assert_eq!(c.disagreements.len(), 1);
        assert_eq!(c.table.lines().count(), 3);
        assert!(compare_models(&a, &[], TableShape::Split).is_err());
        let b2 = vec![row("i2", 4, "b", Optimal, Some(1.0), Some(0.0), 1.0)];
        assert!(matches!(compare_models(&a, &b2, TableShape::Split), Err(BenchError::Mismatch(_))));
    }
}
