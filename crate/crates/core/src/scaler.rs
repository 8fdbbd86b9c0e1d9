//! Per-feature affine scalers.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{quantile_sorted, IvDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalerKind {
    /// `(x − median) / IQR`
    IqrRobust,
    /// `(x − mean) / std`
    Standard,
    /// Observed `[min, max]` mapped linearly onto `[lo, hi]`.
    MinMax { lo: f64, hi: f64 },
}

/// Fitted scaler: `y = offset + (x − location) / scale` per column, where
/// `offset` is the lower target bound for min-max and zero otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    #[serde(flatten)]
    pub kind: ScalerKind,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns whose spread was zero and fell back to unit scale.
    pub degenerate: Vec<bool>,
}

impl ScalerParams {
    pub fn fit(kind: ScalerKind, x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if let ScalerKind::MinMax { lo, hi } = kind {
            if !(hi > lo) {
                return Err(Error::InvalidArgument(format!(
                    "min-max target bounds ({lo}, {hi}) are not increasing"
                )));
            }
        }
        let mut location = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        let mut degenerate = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let mut v: Vec<f64> = col.iter().copied().collect();
            let (loc, spread) = match kind {
                ScalerKind::IqrRobust => {
                    v.sort_by(f64::total_cmp);
                    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
                    (quantile_sorted(&v, 0.5), iqr)
                }
                ScalerKind::Standard => {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = if v.len() > 1 {
                        v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    (mean, var.sqrt())
                }
                ScalerKind::MinMax { lo, hi } => {
                    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (min, (max - min) / (hi - lo))
                }
            };
            if spread > 0.0 && spread.is_finite() {
                location.push(loc);
                scale.push(spread);
                degenerate.push(false);
            } else if kind == ScalerKind::Standard {
                return Err(Error::ScaleDegenerate { feature: j });
            } else {
                warn!("feature {j} has zero spread; using unit scale");
                location.push(loc);
                scale.push(1.0);
                degenerate.push(true);
            }
        }
        Ok(Self {
            kind,
            location,
            scale,
            degenerate,
        })
    }

    fn offset(&self) -> f64 {
        match self.kind {
            ScalerKind::MinMax { lo, .. } => lo,
            _ => 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.location.len()
    }

    pub fn transform_value(&self, col: usize, x: f64) -> f64 {
        self.offset() + (x - self.location[col]) / self.scale[col]
    }

    pub fn inverse_value(&self, col: usize, y: f64) -> f64 {
        (y - self.offset()) * self.scale[col] + self.location[col]
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            self.transform_value(c, x[(r, c)])
        }))
    }

    pub fn inverse_transform(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(y)?;
        Ok(DMatrix::from_fn(y.nrows(), y.ncols(), |r, c| {
            self.inverse_value(c, y[(r, c)])
        }))
    }
}

/// Fits a scaler on the (voltage, intensity) features of a dataset.
pub fn fit_scaler(ds: &IvDataset, kind: ScalerKind) -> Result<ScalerParams> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ScalerParams::fit(kind, &ds.features())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_midpoint() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 80.0, 20.0]);
        let s = ScalerParams::fit(ScalerKind::MinMax { lo: 0.0, hi: 0.8 }, &x).unwrap();
        assert!((s.transform_value(0, 40.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_feature() {
        let x = DMatrix::from_column_slice(3, 1, &[2.0, 2.0, 2.0]);
        assert!(matches!(
            ScalerParams::fit(ScalerKind::Standard, &x),
            Err(Error::ScaleDegenerate { feature: 0 })
        ));
        let s = ScalerParams::fit(ScalerKind::IqrRobust, &x).unwrap();
        assert!(s.degenerate[0]);
        assert_eq!(s.scale[0], 1.0);
        assert_eq!(s.transform_value(0, 3.0), 1.0);
    }

    #[test]
    fn json_carries_kind_tag() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let s = ScalerParams::fit(ScalerKind::MinMax { lo: -1.1, hi: 1.0 }, &x).unwrap();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["kind"], "min-max");
        let back: ScalerParams = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
    }
}
