use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{EnergyError, EnergyMode, Piece};

/// A mode's cost line `intercept + slope·Δ`, valid for `Δ ≥ start`.
struct Line<'a> {
    mode: &'a EnergyMode,
    start: BigRational,
    slope: BigRational,
    intercept: BigRational,
}

impl Line<'_> {
    fn at(&self, x: &BigRational) -> BigRational {
        &self.intercept + &self.slope * x
    }
}

fn exact(v: f64) -> Result<BigRational, EnergyError> {
    BigRational::from_float(v)
        .ok_or_else(|| EnergyError::Validation(format!("non-finite mode parameter {v}")))
}

fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Lower envelope of the mode cost lines, computed exactly.
///
/// Every f64 is a dyadic rational, so converting the inputs loses nothing.
/// Between consecutive event points (activation times and pairwise line
/// crossings) the argmin cannot change, so one probe per interval suffices.
pub(super) fn lower_envelope(modes: &[EnergyMode]) -> Result<Vec<Piece>, EnergyError> {
    let lines = modes
        .iter()
        .map(|m| {
            let start = exact(m.switch_time)?;
            let slope = exact(m.power)?;
            let intercept = exact(m.switch_energy)? - &slope * &start;
            Ok(Line {
                mode: m,
                start,
                slope,
                intercept,
            })
        })
        .collect::<Result<Vec<_>, EnergyError>>()?;

    let mut events: Vec<BigRational> = vec![BigRational::zero()];
    events.extend(lines.iter().map(|l| l.start.clone()));
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            if a.slope != b.slope {
                let x = (&b.intercept - &a.intercept) / (&a.slope - &b.slope);
                if x > BigRational::zero() {
                    events.push(x);
                }
            }
        }
    }
    events.sort();
    events.dedup();

    let one = BigRational::from_integer(BigInt::from(1));
    let two = BigRational::from_integer(BigInt::from(2));
    let mut raw: Vec<(BigRational, usize)> = Vec::with_capacity(events.len());
    for (k, lo) in events.iter().enumerate() {
        let probe = match events.get(k + 1) {
            Some(hi) => (lo + hi) / &two,
            None => lo + &one,
        };
        let best = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.start <= *lo)
            .min_by(|(_, a), (_, b)| {
                a.at(&probe)
                    .cmp(&b.at(&probe))
                    .then_with(|| a.start.cmp(&b.start))
                    .then_with(|| a.mode.name.cmp(&b.mode.name))
            })
            .map(|(i, _)| i)
            // The processing mode starts at 0, so some line is always active.
            .expect("processing mode is active everywhere");
        match raw.last() {
            Some((_, prev)) if *prev == best => {}
            _ => raw.push((lo.clone(), best)),
        }
    }

    let pieces = raw
        .iter()
        .enumerate()
        .map(|(k, (lo, idx))| {
            let line = &lines[*idx];
            Piece {
                lo: to_f64(lo),
                hi: raw.get(k + 1).map_or(f64::INFINITY, |(hi, _)| to_f64(hi)),
                slope: line.mode.power,
                intercept: to_f64(&line.intercept),
                mode: Some(line.mode.name.clone()),
            }
        })
        .collect::<Vec<_>>();
    debug_assert!(pieces
        .windows(2)
        .all(|w| w[0].lo.partial_cmp(&w[1].lo) == Some(Ordering::Less)));
    Ok(pieces)
}
