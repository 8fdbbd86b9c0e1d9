use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub points: usize,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    fn sse(&self) -> f64 {
        self.rms * self.rms * self.points as f64
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let m = x.len();
    if m < 2 {
        return Err(Error::DegenerateFit(format!("{m} point(s) cannot define a line")));
    }
    let mf = m as f64;
    let mx = x.iter().sum::<f64>() / mf;
    let my = y.iter().sum::<f64>() / mf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx <= 0.0 || !sxx.is_finite() || !sxy.is_finite() {
        return Err(Error::DegenerateFit("abscissa has no spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms: (sse / mf).sqrt(),
        points: m,
    })
}

/// Two independent lines fitted on either side of a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSegmentFit {
    pub left: LineFit,
    pub right: LineFit,
    /// Index of the first point belonging to the right segment.
    pub breakpoint: usize,
    /// Slopes agree to within the degeneracy tolerance; a single line
    /// describes the data.
    pub degenerate: bool,
    /// Global fit, always reported.
    pub single: LineFit,
}

/// Relative slope difference below which two segments are treated as one.
const DEGENERATE_SLOPE_TOL: f64 = 1e-3;

/// Exhaustive scan over interior breakpoints minimising the summed segment
/// residuals. Each segment keeps at least `min_points` samples; ties go to
/// the earliest breakpoint. Input must be ordered along `x`.
pub fn two_segment_fit(x: &[f64], y: &[f64], min_points: usize) -> Result<TwoSegmentFit> {
    let min_points = min_points.max(2);
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 * min_points {
        return Err(Error::DegenerateFit(format!(
            "need at least {} points for a two-segment fit, got {}",
            2 * min_points,
            x.len()
        )));
    }
    let single = linear_fit(x, y)?;
    let mut best: Option<(f64, usize, LineFit, LineFit)> = None;
    for b in min_points..=(x.len() - min_points) {
        let (Ok(l), Ok(r)) = (linear_fit(&x[..b], &y[..b]), linear_fit(&x[b..], &y[b..])) else {
            continue;
        };
        let total = l.sse() + r.sse();
        if best.as_ref().is_none_or(|(s, ..)| total < *s) {
            best = Some((total, b, l, r));
        }
    }
    let (_, breakpoint, left, right) =
        best.ok_or_else(|| Error::DegenerateFit("no admissible breakpoint".into()))?;
    let scale = left.slope.abs().max(right.slope.abs()).max(f64::MIN_POSITIVE);
    let degenerate = (left.slope - right.slope).abs() <= DEGENERATE_SLOPE_TOL * scale;
    Ok(TwoSegmentFit {
        left,
        right,
        breakpoint,
        degenerate,
        single,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.rms < 1e-14);
    }

    #[test]
    fn constant_abscissa_is_degenerate() {
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn kink_is_found() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if v < 8.0 { v } else { 8.0 + 3.0 * (v - 8.0) })
            .collect();
        let f = two_segment_fit(&x, &y, 3).unwrap();
        // x = 8 lies on both lines, so either neighbouring split is exact
        assert!((8..=9).contains(&f.breakpoint), "{}", f.breakpoint);
        assert!(!f.degenerate);
        assert!((f.left.slope - 1.0).abs() < 1e-12);
        assert!((f.right.slope - 3.0).abs() < 1e-12);
    }
}
