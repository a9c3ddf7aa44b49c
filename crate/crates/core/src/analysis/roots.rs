//! Root finding and integration on sampled update curves.

use serde::{Deserialize, Serialize};

/// Samples with magnitude at or below this count as zero.
pub const ZERO_BAND: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow...
pub const ROOT_TOL: f64 = 1e-8;
/// ...or the function value is this small.
pub const VALUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    /// Sign changes, refined by bisection.
    pub roots: Vec<f64>,
    /// Midpoints of near-zero stretches the curve touches without crossing.
    pub tangential: Vec<f64>,
}

fn sign(v: f64) -> i8 {
    if v.abs() <= ZERO_BAND {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, lo_sign: i8) -> f64 {
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < VALUE_TOL {
            return mid;
        }
        if (v > 0.0) == (lo_sign > 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zeros of a curve sampled at `values` on the sorted `grid`. Each sign
/// change is refined by bisection on `f`, the function that produced the
/// samples; a jump discontinuity across zero is reported like a root.
pub fn find_critical_points(grid: &[f64], values: &[f64], f: &dyn Fn(f64) -> f64) -> CriticalPoints {
    assert_eq!(grid.len(), values.len(), "grid and samples differ in length");
    let mut out = CriticalPoints::default();
    let mut last: Option<usize> = None;
    for i in 0..values.len() {
        let s = sign(values[i]);
        if s == 0 {
            continue;
        }
        if let Some(p) = last {
            let sp = sign(values[p]);
            if sp != s {
                out.roots.push(bisect(f, grid[p], grid[i], sp));
            } else if i > p + 1 {
                out.tangential.push(0.5 * (grid[p + 1] + grid[i - 1]));
            }
        } else if i > 0 {
            out.tangential.push(0.5 * (grid[0] + grid[i - 1]));
        }
        last = Some(i);
    }
    match last {
        Some(p) if p + 1 < values.len() => out.tangential.push(0.5 * (grid[p + 1] + grid[values.len() - 1])),
        None if !values.is_empty() => out.tangential.push(0.5 * (grid[0] + grid[values.len() - 1])),
        _ => {}
    }
    out
}

/// Left Riemann cumulative integral from the first grid point, scaled to
/// `[0, 1]`. A constant integral gives a flat zero curve.
pub fn optimality_curve(grid: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(grid.len(), values.len(), "grid and samples differ in length");
    let mut acc = 0.0;
    let mut cum = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        cum.push(acc);
        if i + 1 < values.len() {
            acc += values[i] * (grid[i + 1] - grid[i]);
        }
    }
    let lo = cum.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        log::warn!("integrated update curve is constant; returning a flat curve");
        return vec![0.0; values.len()];
    }
    cum.iter().map(|c| (c - lo) / (hi - lo)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub index: usize,
    pub phi: f64,
    pub kind: ExtremumKind,
}

/// Interior local extrema. A plateau counts once, at its first point.
pub fn interior_extrema(grid: &[f64], curve: &[f64]) -> Vec<Extremum> {
    let mut out = Vec::new();
    let n = curve.len();
    let mut i = 1;
    while i + 1 < n {
        let before = curve[i - 1];
        // Extend across a flat stretch starting at i.
        let mut j = i;
        while j + 1 < n && curve[j + 1] == curve[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let after = curve[j + 1];
        let v = curve[i];
        let kind = if v > before && v > after {
            Some(ExtremumKind::Max)
        } else if v < before && v < after {
            Some(ExtremumKind::Min)
        } else {
            None
        };
        if let Some(kind) = kind {
            out.push(Extremum {
                index: i,
                phi: grid[i],
                kind,
            });
        }
        i = j + 1;
    }
    out
}
