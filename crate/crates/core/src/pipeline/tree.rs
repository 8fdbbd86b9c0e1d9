//! Tree-encoded pipelines: feature transformers feeding one estimator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gbt::{Gbt, GbtParams};
use crate::error::{Error, Result};
use crate::knn::{Knn, KnnConfig};
use crate::model::{fit_and_report, FitReport, Regressor, Xy};
use crate::scaler::{ScalerKind, ScalerParams};

pub const MAX_PIPELINE_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Knn(KnnConfig),
    Gbt(GbtParams),
}

impl EstimatorSpec {
    pub fn build(&self) -> Box<dyn Regressor> {
        match self {
            EstimatorSpec::Knn(c) => Box::new(Knn::new(*c)),
            EstimatorSpec::Gbt(p) => Box::new(Gbt::new(*p)),
        }
    }

    pub fn is_gbt(&self) -> bool {
        matches!(self, EstimatorSpec::Gbt(_))
    }
}

/// Node producing a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum FeatureNode {
    /// The raw input features.
    Input,
    Scaler {
        scaler: ScalerKind,
        input: Box<FeatureNode>,
    },
    /// Appends the inner estimator's prediction as a new column.
    Stacking {
        inner: EstimatorSpec,
        input: Box<FeatureNode>,
    },
    /// Column-wise concatenation, left then right.
    Union {
        left: Box<FeatureNode>,
        right: Box<FeatureNode>,
    },
}

impl FeatureNode {
    pub fn depth(&self) -> usize {
        match self {
            FeatureNode::Input => 0,
            FeatureNode::Scaler { input, .. } | FeatureNode::Stacking { input, .. } => {
                1 + input.depth()
            }
            FeatureNode::Union { left, right } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Output width for an input of `n_in` columns.
    pub fn n_features(&self, n_in: usize) -> usize {
        match self {
            FeatureNode::Input => n_in,
            FeatureNode::Scaler { input, .. } => input.n_features(n_in),
            FeatureNode::Stacking { input, .. } => input.n_features(n_in) + 1,
            FeatureNode::Union { left, right } => left.n_features(n_in) + right.n_features(n_in),
        }
    }

    pub fn children(&self) -> Vec<&FeatureNode> {
        match self {
            FeatureNode::Input => vec![],
            FeatureNode::Scaler { input, .. } | FeatureNode::Stacking { input, .. } => {
                vec![input]
            }
            FeatureNode::Union { left, right } => vec![left, right],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut FeatureNode> {
        match self {
            FeatureNode::Input => vec![],
            FeatureNode::Scaler { input, .. } | FeatureNode::Stacking { input, .. } => {
                vec![input]
            }
            FeatureNode::Union { left, right } => vec![left, right],
        }
    }

    /// Child-index paths of every node, pre-order.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for (i, c) in self.children().into_iter().enumerate() {
            for mut p in c.paths() {
                p.insert(0, i);
                out.push(p);
            }
        }
        out
    }

    pub fn at(&self, path: &[usize]) -> Option<&FeatureNode> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i).and_then(|c| c.at(rest)),
        }
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut FeatureNode> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children_mut().into_iter().nth(i).and_then(|c| c.at_mut(rest)),
        }
    }

    fn any(&self, pred: &dyn Fn(&FeatureNode) -> bool) -> bool {
        pred(self) || self.children().iter().any(|c| c.any(pred))
    }
}

/// A pipeline: feature transformers feeding a final estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTree {
    pub estimator: EstimatorSpec,
    pub features: FeatureNode,
}

impl PipelineTree {
    pub fn bare(estimator: EstimatorSpec) -> Self {
        Self {
            estimator,
            features: FeatureNode::Input,
        }
    }

    /// GBT stacking, union with the raw features, then KNN.
    pub fn fig5(gbt: GbtParams, knn: KnnConfig) -> Self {
        Self {
            estimator: EstimatorSpec::Knn(knn),
            features: FeatureNode::Union {
                left: Box::new(FeatureNode::Stacking {
                    inner: EstimatorSpec::Gbt(gbt),
                    input: Box::new(FeatureNode::Input),
                }),
                right: Box::new(FeatureNode::Input),
            },
        }
    }

    pub fn depth(&self) -> usize {
        self.features.depth()
    }

    pub fn contains_gbt(&self) -> bool {
        self.estimator.is_gbt()
            || self.features.any(&|n| {
                matches!(n, FeatureNode::Stacking { inner, .. } if inner.is_gbt())
            })
    }

    /// Structural validity: depth bound and consistent feature counts.
    pub fn validate(&self, n_in: usize) -> Result<()> {
        if self.depth() > MAX_PIPELINE_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "pipeline depth {} exceeds {MAX_PIPELINE_DEPTH}",
                self.depth()
            )));
        }
        if n_in == 0 || self.features.n_features(n_in) == 0 {
            return Err(Error::InvalidArgument("pipeline has no input features".into()));
        }
        Ok(())
    }
}

impl fmt::Display for FeatureNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureNode::Input => write!(f, "input"),
            FeatureNode::Scaler { scaler, input } => {
                let s = match scaler {
                    ScalerKind::IqrRobust => "iqr",
                    ScalerKind::Standard => "standard",
                    ScalerKind::MinMax { .. } => "minmax",
                };
                write!(f, "{s}({input})")
            }
            FeatureNode::Stacking { inner, input } => write!(f, "stack[{inner}]({input})"),
            FeatureNode::Union { left, right } => write!(f, "union({left}, {right})"),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Knn(c) => write!(f, "knn(k={}, p={})", c.k, c.metric.exponent()),
            EstimatorSpec::Gbt(p) => write!(f, "gbt(rounds={}, eta={})", p.rounds, p.learning_rate),
        }
    }
}

impl fmt::Display for PipelineTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- {}", self.estimator, self.features)
    }
}

/// Fits `inner` on `(x, y)` and appends its in-sample predictions.
pub fn stacking_augment<R: Regressor + ?Sized>(
    inner: &mut R,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    inner.fit(x, y)?;
    stacking_transform(inner, x)
}

/// Appends the predictions of an already fitted `inner`.
pub fn stacking_transform<R: Regressor + ?Sized>(inner: &R, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = inner.predict(x)?;
    let n = x.ncols();
    let mut out = x.clone().insert_column(n, 0.0);
    out.set_column(n, &p);
    Ok(out)
}

pub fn feature_union(left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if left.nrows() != right.nrows() {
        return Err(Error::DimensionMismatch {
            expected: left.nrows(),
            got: right.nrows(),
        });
    }
    let (n, a, b) = (left.nrows(), left.ncols(), right.ncols());
    Ok(DMatrix::from_fn(n, a + b, |r, c| {
        if c < a {
            left[(r, c)]
        } else {
            right[(r, c - a)]
        }
    }))
}

/// Observer called with every matrix a transformer is fitted on.
pub type FitObserver = Arc<dyn Fn(&DMatrix<f64>) + Send + Sync>;

enum FittedFeature {
    Input,
    Scaler(ScalerParams, Box<FittedFeature>),
    Stacking(Box<dyn Regressor>, Box<FittedFeature>),
    Union(Box<FittedFeature>, Box<FittedFeature>),
}

fn fit_features(
    node: &FeatureNode,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    observer: Option<&FitObserver>,
) -> Result<(FittedFeature, DMatrix<f64>)> {
    Ok(match node {
        FeatureNode::Input => (FittedFeature::Input, x.clone()),
        FeatureNode::Scaler { scaler, input } => {
            let (child, z) = fit_features(input, x, y, observer)?;
            if let Some(o) = observer {
                o(&z);
            }
            let s = ScalerParams::fit(*scaler, &z)?;
            let out = s.transform(&z)?;
            (FittedFeature::Scaler(s, Box::new(child)), out)
        }
        FeatureNode::Stacking { inner, input } => {
            let (child, z) = fit_features(input, x, y, observer)?;
            if let Some(o) = observer {
                o(&z);
            }
            let mut model = inner.build();
            let out = stacking_augment(&mut model, &z, y)?;
            (FittedFeature::Stacking(model, Box::new(child)), out)
        }
        FeatureNode::Union { left, right } => {
            let (l, zl) = fit_features(left, x, y, observer)?;
            let (r, zr) = fit_features(right, x, y, observer)?;
            (
                FittedFeature::Union(Box::new(l), Box::new(r)),
                feature_union(&zl, &zr)?,
            )
        }
    })
}

fn transform_features(f: &FittedFeature, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match f {
        FittedFeature::Input => Ok(x.clone()),
        FittedFeature::Scaler(s, c) => s.transform(&transform_features(c, x)?),
        FittedFeature::Stacking(m, c) => stacking_transform(m.as_ref(), &transform_features(c, x)?),
        FittedFeature::Union(l, r) => {
            feature_union(&transform_features(l, x)?, &transform_features(r, x)?)
        }
    }
}

/// A [`PipelineTree`] as a [`Regressor`]. Every transformer is fitted on
/// the rows passed to `fit` only.
pub struct PipelineRegressor {
    pub tree: PipelineTree,
    fitted: Option<(FittedFeature, Box<dyn Regressor>)>,
    observer: Option<FitObserver>,
}

impl PipelineRegressor {
    pub fn new(tree: PipelineTree) -> Self {
        Self {
            tree,
            fitted: None,
            observer: None,
        }
    }

    pub fn with_observer(mut self, observer: FitObserver) -> Self {
        self.observer = Some(observer);
        self
    }

    /// Feature matrix seen by the final estimator.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (f, _) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        transform_features(f, x)
    }
}

impl Regressor for PipelineRegressor {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        self.tree.validate(x.ncols())?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let (f, z) = fit_features(&self.tree.features, x, y, self.observer.as_ref())?;
        let mut est = self.tree.estimator.build();
        est.fit(&z, y)?;
        self.fitted = Some((f, est));
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (f, est) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        est.predict(&transform_features(f, x)?)
    }

    fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    fn name(&self) -> String {
        "pipeline".into()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::to_value(&self.tree).unwrap_or_default()
    }
}

/// The fixed three-stage pipeline, fitted on `train` only.
pub fn fig5_pipeline(
    train: &Xy,
    test: Option<&Xy>,
    gbt: GbtParams,
    knn: KnnConfig,
) -> Result<(PipelineRegressor, FitReport)> {
    let mut model = PipelineRegressor::new(PipelineTree::fig5(gbt, knn));
    let report = fit_and_report(&mut model, train, test, None)?;
    Ok((model, report))
}
