//! Piecewise-linear approximation of sampled energy curves.
//!
//! Breakpoints are chosen among the sample abscissae and each segment
//! interpolates the samples at its ends. A DP over breakpoint subsets
//! minimizes the maximum absolute deviation at the samples.

use std::path::Path;

use serde::Deserialize;

use super::{EnergyError, EnergyFunction, PieceSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ApproxOptions {
    /// Allow downward jumps between segments. Off by default: the result is
    /// continuous.
    pub allow_jumps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwlApproximation {
    pub function: EnergyFunction,
    /// Maximum absolute deviation from the samples.
    pub max_error: f64,
    /// Number of segments actually used.
    pub segments: usize,
}

#[derive(Deserialize)]
struct SampleRow {
    delta: f64,
    energy: f64,
}

/// Reads a `delta,energy` CSV with a header row.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>, EnergyError> {
    let mut rdr = csv::Reader::from_path(path.as_ref())
        .map_err(|e| EnergyError::Io(format!("{}: {e}", path.as_ref().display())))?;
    rdr.deserialize::<SampleRow>()
        .map(|r| {
            r.map(|r| (r.delta, r.energy))
                .map_err(|e| EnergyError::Io(e.to_string()))
        })
        .collect()
}

/// Line through samples `i` and `j` (constant if `i == j`).
fn chord(s: &[(f64, f64)], i: usize, j: usize) -> (f64, f64) {
    if i == j {
        return (0.0, s[i].1);
    }
    let slope = (s[j].1 - s[i].1) / (s[j].0 - s[i].0);
    (slope, s[i].1 - slope * s[i].0)
}

fn chord_error(s: &[(f64, f64)], i: usize, j: usize) -> f64 {
    let (slope, icpt) = chord(s, i, j);
    s[i..=j]
        .iter()
        .map(|(x, y)| (y - (icpt + slope * x)).abs())
        .fold(0.0, f64::max)
}

fn validate(samples: &[(f64, f64)], num_segments: usize) -> Result<(), EnergyError> {
    let v = |m: String| Err(EnergyError::Validation(m));
    if num_segments == 0 {
        return v("num_segments must be at least 1".into());
    }
    if samples.len() < num_segments + 1 {
        return v(format!(
            "{} samples cannot support {num_segments} segments",
            samples.len()
        ));
    }
    if samples[0] != (0.0, 0.0) {
        return v("first sample must be (0, 0)".into());
    }
    for (i, (d, e)) in samples.iter().enumerate() {
        if !(d.is_finite() && e.is_finite()) || *d < 0.0 {
            return v(format!("sample {i} is invalid: ({d}, {e})"));
        }
        if i > 0 && !(samples[i - 1].0 < *d) {
            return v(format!("samples are not strictly sorted at index {i}"));
        }
    }
    Ok(())
}

/// Fits at most `num_segments` linear pieces to `samples`.
///
/// Segments never decrease; with `allow_jumps` each segment covers its own
/// run of samples and the function may drop at the next segment's start.
/// The last segment extends to infinity along its own slope.
pub fn approximate_pwl(
    samples: &[(f64, f64)],
    num_segments: usize,
    opts: ApproxOptions,
) -> Result<PwlApproximation, EnergyError> {
    validate(samples, num_segments)?;
    let n = samples.len();

    // A segment is a sample range [i, j]. Continuous fits share endpoints
    // (next range starts at j); jump fits start the next range at j + 1.
    let allowed = |i: usize, j: usize| -> bool {
        if samples[j].1 < samples[i].1 {
            return false;
        }
        if opts.allow_jumps && j + 1 < n {
            let (slope, icpt) = chord(samples, i, j);
            let (x, y) = samples[j + 1];
            return y <= icpt + slope * x;
        }
        true
    };
    let err: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j >= i && (opts.allow_jumps || j > i) && allowed(i, j) {
                        chord_error(samples, i, j)
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();

    // best[k][t]: min max-error covering samples before position t with k
    // segments, where t is the start index of the next segment (or n-1 / n
    // at the end).
    let end = if opts.allow_jumps { n } else { n - 1 };
    let next_start = |j: usize| if opts.allow_jumps { j + 1 } else { j };
    let mut best = vec![vec![f64::INFINITY; n + 1]; num_segments + 1];
    let mut from = vec![vec![usize::MAX; n + 1]; num_segments + 1];
    best[0][0] = 0.0;
    for k in 1..=num_segments {
        for i in 0..n {
            let base = best[k - 1][i];
            if !base.is_finite() || (!opts.allow_jumps && i == n - 1) {
                continue;
            }
            for j in i..n {
                let e = err[i][j];
                if !e.is_finite() {
                    continue;
                }
                let t = next_start(j);
                let cand = base.max(e);
                if cand < best[k][t] {
                    best[k][t] = cand;
                    from[k][t] = i;
                }
            }
        }
    }
    let (segments, max_error) = (1..=num_segments)
        .map(|k| (k, best[k][end]))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .filter(|(_, e)| e.is_finite())
        .ok_or_else(|| EnergyError::Validation("no admissible approximation".into()))?;

    let mut ranges = Vec::with_capacity(segments);
    let mut t = end;
    for k in (1..=segments).rev() {
        let i = from[k][t];
        let j = if opts.allow_jumps { t - 1 } else { t };
        ranges.push((i, j));
        t = i;
    }
    ranges.reverse();

    let pieces: Vec<PieceSpec> = ranges
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let (slope, intercept) = chord(samples, i, j);
            let hi = ranges.get(k + 1).map(|&(ni, _)| samples[ni].0);
            PieceSpec {
                lo: samples[i].0,
                hi,
                slope,
                intercept,
            }
        })
        .collect();
    let function = EnergyFunction::from_pieces(&pieces)?;
    Ok(PwlApproximation {
        function,
        max_error,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyMode;

    fn true_error(a: &PwlApproximation, s: &[(f64, f64)]) -> f64 {
        s.iter()
            .map(|(x, y)| (a.function.evaluate(*x).unwrap() - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn line_is_exact() {
        let s: Vec<_> = (0..=10).map(|d| (d as f64, 40.0 * d as f64)).collect();
        let a = approximate_pwl(&s, 1, ApproxOptions::default()).unwrap();
        assert_eq!(a.max_error, 0.0);
        assert_eq!(a.function.evaluate(25.0).unwrap(), 1000.0);
    }

    #[test]
    fn concave_error_non_increasing() {
        let s: Vec<_> = (0..=60)
            .map(|d| {
                let x = d as f64;
                (x, 400.0 * (1.0 - (-x / 10.0).exp()))
            })
            .collect();
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let a = approximate_pwl(&s, k, ApproxOptions::default()).unwrap();
            assert!(a.max_error <= prev, "k={k}: {} > {prev}", a.max_error);
            assert!((a.max_error - true_error(&a, &s)).abs() < 1e-9);
            prev = a.max_error;
        }
    }

    #[test]
    fn jump_needs_flag() {
        let f = EnergyFunction::from_modes(&[
            EnergyMode::on(40.0),
            EnergyMode::new("off", 0.0, 10.0, 100.0),
        ])
        .unwrap();
        let s: Vec<_> = (0..=20)
            .map(|d| (d as f64, f.evaluate(d as f64).unwrap()))
            .collect();
        let cont = approximate_pwl(&s, 3, ApproxOptions::default()).unwrap();
        assert!(cont.max_error > 0.0);
        assert!((cont.max_error - true_error(&cont, &s)).abs() < 1e-9);

        let jump = approximate_pwl(&s, 3, ApproxOptions { allow_jumps: true }).unwrap();
        assert_eq!(jump.max_error, 0.0);
        for (x, y) in &s {
            assert_eq!(jump.function.evaluate(*x).unwrap(), *y);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let s = vec![(0.0, 0.0), (1.0, 1.0)];
        assert!(approximate_pwl(&s, 2, ApproxOptions::default()).is_err());
        assert!(approximate_pwl(&s, 0, ApproxOptions::default()).is_err());
        let unsorted = vec![(0.0, 0.0), (2.0, 1.0), (1.0, 2.0)];
        assert!(approximate_pwl(&unsorted, 1, ApproxOptions::default()).is_err());
        let offset = vec![(0.0, 1.0), (1.0, 2.0)];
        assert!(approximate_pwl(&offset, 1, ApproxOptions::default()).is_err());
    }
}
