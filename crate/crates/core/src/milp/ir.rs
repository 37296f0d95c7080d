use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    /// `f64::INFINITY` when unbounded; serialized as `null`.
    #[serde(with = "inf_as_null")]
    pub upper: f64,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Sum of `coef · var` terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr(pub Vec<(VarId, f64)>);

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, v: VarId, c: f64) -> Self {
        self.0.push((v, c));
        self
    }

    pub fn add(&mut self, v: VarId, c: f64) {
        self.0.push((v, c));
    }

    pub fn extend(&mut self, other: &LinExpr) {
        self.0.extend_from_slice(&other.0);
    }

    /// Merges repeated variables and drops zero coefficients, keeping first
    /// appearance order.
    pub fn normalized(&self) -> LinExpr {
        let mut order = Vec::new();
        let mut acc: HashMap<VarId, f64> = HashMap::new();
        for &(v, c) in &self.0 {
            if !acc.contains_key(&v) {
                order.push(v);
            }
            *acc.entry(v).or_insert(0.0) += c;
        }
        LinExpr(
            order
                .into_iter()
                .map(|v| (v, acc[&v]))
                .filter(|&(_, c)| c != 0.0)
                .collect(),
        )
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(v, c)| c * x[v.0]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

/// What a variable stands for, with its (1-based) job/machine/position indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub role: String,
    pub indices: Vec<usize>,
}

/// Solver-agnostic MILP: minimize `objective` subject to `constraints`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIR {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    pub annotations: BTreeMap<String, Annotation>,
    #[serde(skip)]
    by_name: HashMap<String, VarId>,
}

impl ModelIR {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: LinExpr::new(),
            annotations: BTreeMap::new(),
            by_name: HashMap::new(),
        }
    }

    /// Adds a variable. Names are generated by the builders, so a duplicate
    /// is a programming error.
    pub fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let id = VarId(self.variables.len());
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        let prev = self.by_name.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate variable name {name}");
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        id
    }

    pub fn binary(&mut self, name: String) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn continuous(&mut self, name: String, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn annotate(&mut self, v: VarId, role: &str, indices: &[usize]) {
        let name = self.variables[v.0].name.clone();
        self.annotations.insert(
            name,
            Annotation {
                role: role.into(),
                indices: indices.to_vec(),
            },
        );
    }

    pub fn constrain(&mut self, name: String, expr: LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            name,
            expr,
            relation,
            rhs,
        });
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn count_role(&self, role: &str) -> usize {
        self.annotations.values().filter(|a| a.role == role).count()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Rebuilds the name index, e.g. after deserialization.
    pub fn reindex(&mut self) {
        self.by_name = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
    }

    /// Declared-before-use, unique names and binary bounds.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.variables.len();
        let mut seen = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if seen.insert(v.name.as_str(), i).is_some() {
                return Err(ModelError::Invalid(format!("duplicate variable {}", v.name)));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::Invalid(format!("binary {} has bounds outside [0,1]", v.name)));
            }
            if v.lower > v.upper {
                return Err(ModelError::Invalid(format!("variable {} has empty bounds", v.name)));
            }
        }
        let check = |e: &LinExpr, what: &str| {
            e.0.iter().try_for_each(|(v, c)| {
                if v.0 >= n {
                    Err(ModelError::Invalid(format!("{what} references undeclared variable #{}", v.0)))
                } else if !c.is_finite() {
                    Err(ModelError::Invalid(format!("{what} has a non-finite coefficient")))
                } else {
                    Ok(())
                }
            })
        };
        check(&self.objective, "objective")?;
        let mut rows = HashMap::new();
        for c in &self.constraints {
            check(&c.expr, &c.name)?;
            if rows.insert(c.name.as_str(), ()).is_some() {
                return Err(ModelError::Invalid(format!("duplicate constraint {}", c.name)));
            }
        }
        Ok(())
    }

    /// Checks a full assignment of values against bounds, integrality and
    /// rows. Returns the objective value or the names of violated items.
    pub fn check_point(&self, x: &[f64], tol: f64) -> Result<f64, Vec<String>> {
        let mut bad = Vec::new();
        for (v, &val) in self.variables.iter().zip(x) {
            if val < v.lower - tol || val > v.upper + tol {
                bad.push(format!("bound {} = {val}", v.name));
            }
            if v.kind == VarKind::Binary && (val - val.round()).abs() > tol {
                bad.push(format!("integrality {} = {val}", v.name));
            }
        }
        for c in &self.constraints {
            let lhs = c.expr.value(x);
            let ok = match c.relation {
                Relation::Le => lhs <= c.rhs + tol,
                Relation::Ge => lhs >= c.rhs - tol,
                Relation::Eq => (lhs - c.rhs).abs() <= tol,
            };
            if !ok {
                bad.push(format!("{}: {lhs} {} {}", c.name, c.relation, c.rhs));
            }
        }
        if bad.is_empty() {
            Ok(self.objective.value(x))
        } else {
            Err(bad)
        }
    }

    /// Dense value vector from a name → value map; missing names read as 0.
    pub fn values_from_map(&self, values: &HashMap<String, f64>) -> Vec<f64> {
        self.variables
            .iter()
            .map(|v| values.get(&v.name).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}
