//! Idle-energy functions.
//!
//! An energy function maps the length `Δ` of an idle period to the cheapest
//! energy a machine can spend over that period, given the set of modes it can
//! switch to. For a finite mode set the function is the lower envelope
//!
//! ```text
//! f(Δ) = min { C_m + P_m · (Δ − T_m) : Δ ≥ T_m }
//! ```
//!
//! which is piecewise linear and may jump downwards wherever a new mode
//! becomes reachable. Pieces are left-closed/right-open, so at a jump the
//! cheaper right-hand piece owns the boundary point.

mod approx;
mod envelope;
mod graph;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use approx::{approximate_pwl, read_samples_csv, ApproxOptions, PwlApproximation};
pub use graph::{from_transition_graph, GraphEdge, GraphNode, TransitionGraph};

/// Absolute tolerance used when validating raw piece data.
const PIECE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("invalid mode set: {0}")]
    InvalidModeSet(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("delta must be a non-negative number, got {0}")]
    Domain(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("transition graph error: {0}")]
    Graph(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One machine mode: steady power, round-trip switching time and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMode {
    pub name: String,
    pub power: f64,
    #[serde(default)]
    pub switch_time: f64,
    #[serde(default)]
    pub switch_energy: f64,
}

impl EnergyMode {
    pub fn new(name: impl Into<String>, power: f64, switch_time: f64, switch_energy: f64) -> Self {
        Self {
            name: name.into(),
            power,
            switch_time,
            switch_energy,
        }
    }

    /// The processing mode, which switches in zero time at zero cost.
    pub fn on(power: f64) -> Self {
        Self::new("on", power, 0.0, 0.0)
    }

    pub fn is_processing(&self) -> bool {
        self.switch_time == 0.0 && self.switch_energy == 0.0
    }

    /// Energy of spending an idle period of length `delta` in this mode.
    /// Only meaningful for `delta >= switch_time`.
    pub fn cost(&self, delta: f64) -> f64 {
        self.switch_energy + self.power * (delta - self.switch_time)
    }

    fn check(&self) -> Result<(), EnergyError> {
        for (what, v) in [
            ("power", self.power),
            ("switch_time", self.switch_time),
            ("switch_energy", self.switch_energy),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(EnergyError::Validation(format!(
                    "mode '{}': {what} must be finite and non-negative, got {v}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// One affine piece `intercept + slope · Δ` on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    /// `f64::INFINITY` for the last piece.
    pub hi: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Mode attaining the minimum on this piece, when built from modes.
    pub mode: Option<String>,
}

impl Piece {
    pub fn value(&self, delta: f64) -> f64 {
        self.intercept + self.slope * delta
    }
}

/// Serialized form of a piece; `hi: null` stands for infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub lo: f64,
    pub hi: Option<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// JSON representation: either the modes the envelope is built from, or raw pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergyFunctionSpec {
    Modes { modes: Vec<EnergyMode> },
    Pieces { pieces: Vec<PieceSpec> },
}

/// Piecewise-linear idle-energy function covering `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnergyFunctionSpec", into = "EnergyFunctionSpec")]
pub struct EnergyFunction {
    pieces: Vec<Piece>,
    modes: Option<Vec<EnergyMode>>,
}

impl TryFrom<EnergyFunctionSpec> for EnergyFunction {
    type Error = EnergyError;

    fn try_from(spec: EnergyFunctionSpec) -> Result<Self, Self::Error> {
        match spec {
            EnergyFunctionSpec::Modes { modes } => Self::from_modes(&modes),
            EnergyFunctionSpec::Pieces { pieces } => Self::from_pieces(&pieces),
        }
    }
}

impl From<EnergyFunction> for EnergyFunctionSpec {
    fn from(f: EnergyFunction) -> Self {
        f.spec()
    }
}

impl EnergyFunction {
    /// Lower envelope of the given modes.
    ///
    /// Exactly one mode must have zero switching time and energy; it is the
    /// processing mode. The envelope is computed in exact rational arithmetic,
    /// so integer mode data gives bit-exact values at integer `Δ`. Ties are
    /// broken toward the smaller switching time, then the smaller label.
    pub fn from_modes(modes: &[EnergyMode]) -> Result<Self, EnergyError> {
        if modes.is_empty() {
            return Err(EnergyError::InvalidModeSet("no modes given".into()));
        }
        for m in modes {
            m.check()?;
        }
        for (i, a) in modes.iter().enumerate() {
            if modes[..i].iter().any(|b| b.name == a.name) {
                return Err(EnergyError::InvalidModeSet(format!(
                    "duplicate mode name '{}'",
                    a.name
                )));
            }
        }
        let on_count = modes.iter().filter(|m| m.is_processing()).count();
        if on_count != 1 {
            return Err(EnergyError::InvalidModeSet(format!(
                "expected exactly one processing mode (switch_time = switch_energy = 0), found {on_count}"
            )));
        }
        let pieces = envelope::lower_envelope(modes)?;
        Ok(Self {
            pieces,
            modes: Some(modes.to_vec()),
        })
    }

    /// Function given directly by its pieces (no mode annotations).
    pub fn from_pieces(specs: &[PieceSpec]) -> Result<Self, EnergyError> {
        let pieces = specs
            .iter()
            .map(|s| Piece {
                lo: s.lo,
                hi: s.hi.unwrap_or(f64::INFINITY),
                slope: s.slope,
                intercept: s.intercept,
                mode: None,
            })
            .collect();
        let f = Self {
            pieces,
            modes: None,
        };
        f.check()?;
        Ok(f)
    }

    /// The energy function of a machine that can only stay on.
    pub fn always_on(power: f64) -> Result<Self, EnergyError> {
        Self::from_modes(&[EnergyMode::on(power)])
    }

    /// Checks the structural invariants of the pieces.
    pub fn check(&self) -> Result<(), EnergyError> {
        let v = |msg: String| Err(EnergyError::Validation(msg));
        let Some(first) = self.pieces.first() else {
            return v("energy function has no pieces".into());
        };
        if first.lo != 0.0 {
            return v(format!("first piece must start at 0, starts at {}", first.lo));
        }
        if self.pieces.last().map(|p| p.hi) != Some(f64::INFINITY) {
            return v("last piece must extend to infinity".into());
        }
        let p_on = first.slope;
        for (i, p) in self.pieces.iter().enumerate() {
            if !(p.lo.is_finite() && p.slope.is_finite() && p.intercept.is_finite()) {
                return v(format!("piece {i} has non-finite data"));
            }
            if !(p.hi > p.lo) {
                return v(format!("piece {i} is empty: [{}, {})", p.lo, p.hi));
            }
            if p.slope < 0.0 {
                return v(format!("piece {i} has negative slope {}", p.slope));
            }
            if i + 1 < self.pieces.len() && self.pieces[i + 1].lo != p.hi {
                return v(format!("pieces {i} and {} are not contiguous", i + 1));
            }
            if i > 0 {
                let left = self.pieces[i - 1].value(p.lo);
                if p.value(p.lo) > left + PIECE_TOL * left.abs().max(1.0) {
                    return v(format!("upward jump at {}", p.lo));
                }
            }
            // f(Δ) ≤ P_on·Δ is affine on the piece, so the endpoints decide it.
            let tol = |x: f64| PIECE_TOL * x.abs().max(1.0);
            if p.value(p.lo) > p_on * p.lo + tol(p_on * p.lo) {
                return v(format!("piece {i} exceeds the always-on cost at {}", p.lo));
            }
            if p.hi.is_finite() {
                if p.value(p.hi) > p_on * p.hi + tol(p_on * p.hi) {
                    return v(format!("piece {i} exceeds the always-on cost at {}", p.hi));
                }
            } else if p.slope > p_on {
                return v(format!("last piece slope {} exceeds processing power {p_on}", p.slope));
            }
        }
        if first.intercept != 0.0 {
            return v(format!("f(0) must be 0, got {}", first.intercept));
        }
        Ok(())
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Modes the function was built from, if any.
    pub fn modes(&self) -> Option<&[EnergyMode]> {
        self.modes.as_deref()
    }

    pub fn spec(&self) -> EnergyFunctionSpec {
        match &self.modes {
            Some(modes) => EnergyFunctionSpec::Modes {
                modes: modes.clone(),
            },
            None => EnergyFunctionSpec::Pieces {
                pieces: self
                    .pieces
                    .iter()
                    .map(|p| PieceSpec {
                        lo: p.lo,
                        hi: p.hi.is_finite().then_some(p.hi),
                        slope: p.slope,
                        intercept: p.intercept,
                    })
                    .collect(),
            },
        }
    }

    /// Power of the processing mode (slope of the first piece).
    pub fn processing_power(&self) -> f64 {
        self.pieces[0].slope
    }

    /// Piece boundaries other than 0, in increasing order.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().skip(1).map(|p| p.lo)
    }

    fn piece_index(&self, delta: f64) -> usize {
        self.pieces.partition_point(|p| p.lo <= delta) - 1
    }

    /// The piece whose interval contains `delta`.
    pub fn piece_at(&self, delta: f64) -> Result<&Piece, EnergyError> {
        if !(delta >= 0.0) {
            return Err(EnergyError::Domain(delta));
        }
        Ok(&self.pieces[self.piece_index(delta)])
    }

    pub fn evaluate(&self, delta: f64) -> Result<f64, EnergyError> {
        Ok(self.piece_at(delta)?.value(delta))
    }

    /// Evaluates with `delta` snapped to 0 or to a nearby breakpoint when it
    /// lies within `tol` of one. Used on solver output, where an idle period
    /// that should end exactly on a breakpoint may come back a hair short.
    pub fn evaluate_snapped(&self, delta: f64, tol: f64) -> Result<f64, EnergyError> {
        let mut d = delta;
        if d < 0.0 && d >= -tol {
            d = 0.0;
        }
        if let Some(b) = self.breakpoints().find(|b| (b - d).abs() <= tol) {
            d = b;
        }
        self.evaluate(d)
    }

    /// Mode attaining the minimum at `delta`, when annotations are present.
    pub fn mode_at(&self, delta: f64) -> Result<Option<&str>, EnergyError> {
        Ok(self.piece_at(delta)?.mode.as_deref())
    }

    /// Intercept of the final (unbounded) piece: the energy asymptote of very
    /// long idle periods when the last mode draws no power.
    pub fn final_intercept(&self) -> f64 {
        self.pieces.last().map(|p| p.intercept).unwrap_or(0.0)
    }

    /// Smallest idle length at which each power-saving mode becomes optimal.
    ///
    /// Modes that never appear on the envelope are omitted.
    pub fn break_even_times(&self) -> Result<Vec<(String, f64)>, EnergyError> {
        let modes = self.modes.as_ref().ok_or_else(|| {
            EnergyError::Unsupported("function has no mode annotations".into())
        })?;
        Ok(modes
            .iter()
            .filter(|m| !m.is_processing())
            .filter_map(|m| {
                self.pieces
                    .iter()
                    .find(|p| p.mode.as_deref() == Some(m.name.as_str()))
                    .map(|p| (m.name.clone(), p.lo))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_mode() -> EnergyFunction {
        EnergyFunction::from_modes(&[
            EnergyMode::on(40.0),
            EnergyMode::new("off", 0.0, 10.0, 100.0),
        ])
        .unwrap()
    }

    #[test]
    fn on_only() {
        let f = EnergyFunction::always_on(40.0).unwrap();
        assert_eq!(f.evaluate(3.0).unwrap(), 120.0);
        assert_eq!(f.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(f.pieces().len(), 1);
    }

    #[test]
    fn two_mode_values() {
        let f = two_mode();
        assert_eq!(f.evaluate(5.0).unwrap(), 200.0);
        assert_eq!(f.evaluate(10.0).unwrap(), 100.0);
        assert_eq!(f.evaluate(20.0).unwrap(), 100.0);
        assert!((f.evaluate(9.999).unwrap() - 399.96).abs() < 1e-9);
        assert_eq!(f.mode_at(10.0).unwrap(), Some("off"));
        assert_eq!(f.mode_at(9.999).unwrap(), Some("on"));
    }

    #[test]
    fn graph_derived_off_mode() {
        let f = EnergyFunction::from_modes(&[
            EnergyMode::on(40.0),
            EnergyMode::new("off", 0.0, 3.0, 11.0),
        ])
        .unwrap();
        assert_eq!(f.evaluate(3.0).unwrap(), 11.0);
    }

    #[test]
    fn negative_delta_is_domain_error() {
        assert_eq!(two_mode().evaluate(-1.0), Err(EnergyError::Domain(-1.0)));
        assert!(two_mode().evaluate(f64::NAN).is_err());
    }

    #[test]
    fn break_even() {
        assert_eq!(
            two_mode().break_even_times().unwrap(),
            vec![("off".to_string(), 10.0)]
        );
        let f = EnergyFunction::from_modes(&[
            EnergyMode::on(40.0),
            EnergyMode::new("sleep", 0.0, 2.0, 100.0),
        ])
        .unwrap();
        assert_eq!(
            f.break_even_times().unwrap(),
            vec![("sleep".to_string(), 2.5)]
        );
        assert!(EnergyFunction::always_on(40.0)
            .unwrap()
            .break_even_times()
            .unwrap()
            .is_empty());
    }

    #[test]
    fn break_even_needs_annotations() {
        let f = EnergyFunction::from_pieces(&two_mode().spec_pieces()).unwrap();
        assert!(matches!(
            f.break_even_times(),
            Err(EnergyError::Unsupported(_))
        ));
    }

    #[test]
    fn dominated_mode_is_absent() {
        let f = EnergyFunction::from_modes(&[
            EnergyMode::on(40.0),
            EnergyMode::new("off", 0.0, 10.0, 100.0),
            EnergyMode::new("warm", 30.0, 10.0, 500.0),
        ])
        .unwrap();
        let be = f.break_even_times().unwrap();
        assert_eq!(be, vec![("off".to_string(), 10.0)]);
    }

    #[test]
    fn invalid_mode_sets() {
        assert!(matches!(
            EnergyFunction::from_modes(&[]),
            Err(EnergyError::InvalidModeSet(_))
        ));
        assert!(matches!(
            EnergyFunction::from_modes(&[EnergyMode::new("off", 0.0, 3.0, 11.0)]),
            Err(EnergyError::InvalidModeSet(_))
        ));
        assert!(matches!(
            EnergyFunction::from_modes(&[EnergyMode::on(40.0), EnergyMode::new("x", -1.0, 3.0, 11.0)]),
            Err(EnergyError::Validation(_))
        ));
        assert!(matches!(
            EnergyFunction::from_modes(&[EnergyMode::on(40.0), EnergyMode::on(30.0)]),
            Err(EnergyError::InvalidModeSet(_))
        ));
    }

    #[test]
    fn raw_pieces_validation() {
        let ok = vec![
            PieceSpec { lo: 0.0, hi: Some(10.0), slope: 40.0, intercept: 0.0 },
            PieceSpec { lo: 10.0, hi: None, slope: 0.0, intercept: 100.0 },
        ];
        assert!(EnergyFunction::from_pieces(&ok).is_ok());

        let mut gap = ok.clone();
        gap[1].lo = 11.0;
        assert!(EnergyFunction::from_pieces(&gap).is_err());

        let mut up = ok.clone();
        up[1].intercept = 500.0;
        assert!(EnergyFunction::from_pieces(&up).is_err());

        let mut nonzero = ok.clone();
        nonzero[0].intercept = 1.0;
        assert!(EnergyFunction::from_pieces(&nonzero).is_err());

        let mut bounded = ok;
        bounded[1].hi = Some(50.0);
        assert!(EnergyFunction::from_pieces(&bounded).is_err());
    }

    #[test]
    fn json_round_trip_keeps_form() {
        let f = two_mode();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"modes\""));
        let g: EnergyFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);

        let raw = EnergyFunction::from_pieces(&f.spec_pieces()).unwrap();
        let s = serde_json::to_string(&raw).unwrap();
        assert!(s.contains("\"pieces\"") && s.contains("null"));
        let g: EnergyFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(raw, g);
    }

    #[test]
    fn snapped_evaluation() {
        let f = two_mode();
        assert_eq!(f.evaluate_snapped(10.0 - 1e-9, 1e-6).unwrap(), 100.0);
        assert_eq!(f.evaluate_snapped(-1e-9, 1e-6).unwrap(), 0.0);
        assert!(f.evaluate_snapped(-1e-3, 1e-6).is_err());
    }

    impl EnergyFunction {
        fn spec_pieces(&self) -> Vec<PieceSpec> {
            self.pieces
                .iter()
                .map(|p| PieceSpec {
                    lo: p.lo,
                    hi: p.hi.is_finite().then_some(p.hi),
                    slope: p.slope,
                    intercept: p.intercept,
                })
                .collect()
        }
    }
}
