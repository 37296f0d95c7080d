//! CPLEX-LP text output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::ir::{LinExpr, ModelIR, Relation, VarId, VarKind};
use super::ModelError;

const TERMS_PER_LINE: usize = 8;

/// Mapping between IR variables and the names written to the file.
#[derive(Debug, Clone, Default)]
pub struct LpNames {
    pub columns: Vec<String>,
    by_lp_name: HashMap<String, VarId>,
}

impl LpNames {
    pub fn var(&self, lp_name: &str) -> Option<VarId> {
        self.by_lp_name.get(lp_name).copied()
    }

    /// Dense value vector from solver output keyed by LP name; names not
    /// reported read as 0 (solvers commonly omit zero columns).
    pub fn values(&self, reported: &HashMap<String, f64>) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| reported.get(c).copied().unwrap_or(0.0))
            .collect()
    }
}

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_!\"#$%&()/,.;?@`'{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    // digits and '.' cannot lead; a leading e/E can be read as an exponent
    if out
        .chars()
        .next()
        .map_or(true, |c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E')
    {
        out.insert(0, 'v');
    }
    out
}

fn sanitized_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<Vec<String>, ModelError> {
    let mut seen: HashMap<String, &str> = HashMap::new();
    let mut out = Vec::new();
    for name in names {
        let s = sanitize(name);
        if let Some(prev) = seen.insert(s.clone(), name) {
            return Err(ModelError::NameCollision(prev.into(), name.into(), s));
        }
        out.push(s);
    }
    Ok(out)
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_expr(buf: &mut String, expr: &LinExpr, cols: &[String]) {
    let terms = expr.normalized().0;
    if terms.is_empty() {
        // an empty left-hand side still needs a column reference
        let _ = write!(buf, " 0 {}", cols[0]);
        return;
    }
    for (idx, (v, c)) in terms.iter().enumerate() {
        if idx > 0 && idx % TERMS_PER_LINE == 0 {
            buf.push_str("\n   ");
        }
        let sign = if *c < 0.0 { '-' } else { '+' };
        let _ = write!(buf, " {sign} {} {}", num(c.abs()), cols[v.0]);
    }
}

/// Renders the model. Variables keep their IR order.
pub fn write_lp(model: &ModelIR) -> Result<(String, LpNames), ModelError> {
    model.validate()?;
    if model.variables.is_empty() {
        return Err(ModelError::Invalid("model has no variables".into()));
    }
    let cols = sanitized_unique(model.variables.iter().map(|v| v.name.as_str()))?;
    let rows = sanitized_unique(model.constraints.iter().map(|c| c.name.as_str()))?;

    let mut buf = String::new();
    let _ = writeln!(buf, "\\ {}", model.name);
    buf.push_str("Minimize\n obj:");
    write_expr(&mut buf, &model.objective, &cols);
    buf.push_str("\nSubject To\n");
    for (c, name) in model.constraints.iter().zip(&rows) {
        let _ = write!(buf, " {name}:");
        write_expr(&mut buf, &c.expr, &cols);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(buf, " {rel} {}", num(c.rhs));
    }
    buf.push_str("Bounds\n");
    for (v, col) in model.variables.iter().zip(&cols) {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(buf, " {col} = {}", num(v.lower));
            }
            (true, true) => {
                let _ = writeln!(buf, " {} <= {col} <= {}", num(v.lower), num(v.upper));
            }
            (true, false) => {
                let _ = writeln!(buf, " {col} >= {}", num(v.lower));
            }
            (false, true) => {
                let _ = writeln!(buf, " -inf <= {col} <= {}", num(v.upper));
            }
            (false, false) => {
                let _ = writeln!(buf, " {col} free");
            }
        }
    }
    let binaries: Vec<&String> = model
        .variables
        .iter()
        .zip(&cols)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, c)| c)
        .collect();
    if !binaries.is_empty() {
        buf.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(buf, " {}", line.join(" "));
        }
    }
    buf.push_str("End\n");

    let by_lp_name = cols.iter().enumerate().map(|(i, c)| (c.clone(), VarId(i))).collect();
    Ok((
        buf,
        LpNames {
            columns: cols,
            by_lp_name,
        },
    ))
}

pub fn emit_lp(model: &ModelIR, path: &Path) -> Result<LpNames, ModelError> {
    let (text, names) = write_lp(model)?;
    std::fs::write(path, text)?;
    Ok(names)
}
