//! Regression contract, metrics, cross-validation and grid search.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold_indices, IvDataset};
use crate::error::{Error, Result};
use crate::scaler::{ScalerKind, ScalerParams};

/// Common interface of every regressor.
pub trait Regressor: Send + Sync {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()>;
    /// One prediction per row of `x`.
    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>>;
    fn is_fitted(&self) -> bool;
    fn name(&self) -> String;
    fn hyperparameters(&self) -> serde_json::Value;
}

/// Feature matrix and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Xy {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Xy {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn from_dataset(ds: &IvDataset) -> Self {
        Self {
            x: ds.features(),
            y: ds.targets(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn rows(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub hyperparameters: serde_json::Value,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub validation_mse: Option<f64>,
    /// On the test set when present, else on the training set.
    pub r2: Option<f64>,
    pub wall_time_seconds: f64,
}

fn check_pair(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let ss: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ss / y_true.len() as f64)
}

pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    if y_true.len() < 2 {
        return Err(Error::InvalidArgument("r2 needs at least two samples".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Least-squares solution of `Xω ≈ Y`, i.e. `ω = (XᵀX)⁻¹XᵀY`, computed via
/// an SVD. Rank-deficient `X` is rejected.
pub fn linear_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = x.shape();
    if m != y.len() {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if n == 0 || m < n {
        return Err(Error::SingularMatrix);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite entry in system".into()));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = m.max(n) as f64 * f64::EPSILON * smax;
    if smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::SingularMatrix);
    }
    svd.solve(y, 0.0).map_err(|_| Error::SingularMatrix)
}

/// Closed-form linear baseline with an intercept column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRegression {
    /// Intercept first, then one coefficient per feature.
    pub coefficients: Option<Vec<f64>>,
}

impl LinearRegression {
    fn design(x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                x[(r, c - 1)]
            }
        })
    }
}

impl Regressor for LinearRegression {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        let w = linear_least_squares(&Self::design(x), y)?;
        self.coefficients = Some(w.iter().copied().collect());
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let w = self.coefficients.as_ref().ok_or(Error::NotFitted)?;
        if x.ncols() + 1 != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len() - 1,
                got: x.ncols(),
            });
        }
        Ok(Self::design(x) * DVector::from_column_slice(w))
    }

    fn is_fitted(&self) -> bool {
        self.coefficients.is_some()
    }

    fn name(&self) -> String {
        "linear".into()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::json!({})
    }
}

/// Fits a feature scaler on the training rows before the inner model, and
/// applies it again at prediction time.
#[derive(Debug, Clone)]
pub struct Scaled<R> {
    pub kind: ScalerKind,
    pub scaler: Option<ScalerParams>,
    pub inner: R,
}

impl<R> Scaled<R> {
    pub fn new(kind: ScalerKind, inner: R) -> Self {
        Self {
            kind,
            scaler: None,
            inner,
        }
    }
}

impl<R: Regressor> Regressor for Scaled<R> {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        let s = ScalerParams::fit(self.kind, x)?;
        self.inner.fit(&s.transform(x)?, y)?;
        self.scaler = Some(s);
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let s = self.scaler.as_ref().ok_or(Error::NotFitted)?;
        self.inner.predict(&s.transform(x)?)
    }

    fn is_fitted(&self) -> bool {
        self.scaler.is_some() && self.inner.is_fitted()
    }

    fn name(&self) -> String {
        self.inner.name()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::json!({ "scaler": self.kind, "model": self.inner.hyperparameters() })
    }
}

/// Standardises the targets before fitting the inner model and maps its
/// predictions back.
#[derive(Debug, Clone)]
pub struct TargetScaled<R> {
    /// (mean, std) of the training targets.
    pub target_scale: Option<(f64, f64)>,
    pub inner: R,
}

impl<R> TargetScaled<R> {
    pub fn new(inner: R) -> Self {
        Self {
            target_scale: None,
            inner,
        }
    }
}

impl<R: Regressor> Regressor for TargetScaled<R> {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let m = y.mean();
        let sd = if y.len() > 1 {
            (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let sd = if sd > 0.0 { sd } else { 1.0 };
        self.inner.fit(x, &y.map(|v| (v - m) / sd))?;
        self.target_scale = Some((m, sd));
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (m, sd) = self.target_scale.ok_or(Error::NotFitted)?;
        Ok(self.inner.predict(x)?.map(|v| v * sd + m))
    }

    fn is_fitted(&self) -> bool {
        self.target_scale.is_some() && self.inner.is_fitted()
    }

    fn name(&self) -> String {
        self.inner.name()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        self.inner.hyperparameters()
    }
}

impl Regressor for Box<dyn Regressor> {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        (**self).fit(x, y)
    }
    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        (**self).predict(x)
    }
    fn is_fitted(&self) -> bool {
        (**self).is_fitted()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn hyperparameters(&self) -> serde_json::Value {
        (**self).hyperparameters()
    }
}

/// MSE of a fitted model on a data set.
pub fn score<R: Regressor + ?Sized>(model: &R, data: &Xy) -> Result<f64> {
    let pred = model.predict(&data.x)?;
    mse(data.y.as_slice(), pred.as_slice())
}

/// Fits `model` on `train` and scores it on `train` and optionally `test`.
pub fn fit_and_report<R: Regressor + ?Sized>(
    model: &mut R,
    train: &Xy,
    test: Option<&Xy>,
    validation_mse: Option<f64>,
) -> Result<FitReport> {
    let start = Instant::now();
    model.fit(&train.x, &train.y)?;
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let train_pred = model.predict(&train.x)?;
    let train_mse = mse(train.y.as_slice(), train_pred.as_slice())?;
    let (test_mse, r2) = match test {
        Some(t) => {
            let p = model.predict(&t.x)?;
            (
                Some(mse(t.y.as_slice(), p.as_slice())?),
                r2_score(t.y.as_slice(), p.as_slice()).ok(),
            )
        }
        None => (None, r2_score(train.y.as_slice(), train_pred.as_slice()).ok()),
    };
    Ok(FitReport {
        model: model.name(),
        hyperparameters: model.hyperparameters(),
        train_mse,
        test_mse,
        validation_mse,
        r2,
        wall_time_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

/// k-fold cross-validation. `make` builds a fresh unfitted model per fold.
/// Folds run in parallel; the result does not depend on scheduling.
pub fn cross_validate<R, F>(make: F, data: &Xy, k: usize, seed: u64) -> Result<CvScore>
where
    R: Regressor,
    F: Fn() -> R + Sync,
{
    let folds = kfold_indices(data.len(), k, seed)?;
    let fold_mse: Vec<Result<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, val)| {
            let mut in_val = vec![false; data.len()];
            for &i in val {
                in_val[i] = true;
            }
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| !in_val[i]).collect();
            let mut model = make();
            let mut run = || -> Result<f64> {
                model.fit(&data.x.select_rows(&train_idx), &data.y.select_rows(&train_idx))?;
                score(&model, &data.rows(val))
            };
            run().map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect();
    let fold_mse = fold_mse.into_iter().collect::<Result<Vec<f64>>>()?;
    let mean_mse = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
    Ok(CvScore { fold_mse, mean_mse })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult<P> {
    pub best: P,
    pub best_index: usize,
    /// Mean CV MSE per grid entry; `None` where every fold failed to fit.
    pub scores: Vec<Option<f64>>,
    pub report: FitReport,
}

/// Exhaustive search over `grid`, scoring each entry by mean k-fold MSE.
/// The lowest score wins; ties go to the earliest entry. The winner is
/// refitted on all of `train`.
pub fn grid_search<P, R, F>(
    grid: &[P],
    make: F,
    train: &Xy,
    test: Option<&Xy>,
    k: usize,
    seed: u64,
) -> Result<GridSearchResult<P>>
where
    P: Clone + Sync,
    R: Regressor,
    F: Fn(&P) -> R + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let results: Vec<Result<CvScore>> = grid
        .par_iter()
        .map(|p| cross_validate(|| make(p), train, k, seed))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut first_err = None;
    let mut scores = Vec::with_capacity(grid.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(cv) => {
                scores.push(Some(cv.mean_mse));
                if best.is_none_or(|(_, b)| cv.mean_mse < b) {
                    best = Some((i, cv.mean_mse));
                }
            }
            Err(e) => {
                scores.push(None);
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((best_index, cv_mse)) = best else {
        return Err(Error::GridExhausted(Box::new(
            first_err.expect("non-empty grid with no successes has an error"),
        )));
    };
    let mut model = make(&grid[best_index]);
    let report = fit_and_report(&mut model, train, test, Some(cv_mse))?;
    Ok(GridSearchResult {
        best: grid[best_index].clone(),
        best_index,
        scores,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_trivia() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn r2_trivia() {
        let y = [1.0, 2.0, 6.0];
        assert_eq!(r2_score(&y, &y).unwrap(), 1.0);
        assert_eq!(r2_score(&y, &[3.0; 3]).unwrap(), 0.0);
        // SS_tot = 4+1+9 = 14, SS_res = 9+0+36 = 45
        let r = r2_score(&y, &[4.0, 2.0, 0.0]).unwrap();
        assert!((r - (1.0 - 45.0 / 14.0)).abs() < 1e-15);
        assert!(matches!(r2_score(&[2.0, 2.0], &[1.0, 2.0]), Err(Error::DegenerateTarget)));
    }

    #[test]
    fn lls_identity_and_line() {
        let y = DVector::from_vec(vec![3.0, -1.0, 2.5]);
        let w = linear_least_squares(&DMatrix::identity(3, 3), &y).unwrap();
        assert!((w - &y).norm() < 1e-14);
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let w = linear_least_squares(&x, &y).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-10 && (w[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn lls_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(linear_least_squares(&x, &y), Err(Error::SingularMatrix)));
    }

    #[test]
    fn predict_before_fit() {
        let m = LinearRegression::default();
        assert!(matches!(m.predict(&DMatrix::zeros(2, 1)), Err(Error::NotFitted)));
    }
}
