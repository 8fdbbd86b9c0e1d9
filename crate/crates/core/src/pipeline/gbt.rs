//! Gradient-boosted regression trees on squared loss.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Regressor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub rounds: usize,
    /// Shrinkage η ∈ (0, 1].
    pub learning_rate: f64,
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 50,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_leaf: 1,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "shrinkage {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "kebab-case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: TreeNode,
}

impl RegressionTree {
    /// Exact greedy variance-reduction tree on `(x, r)` restricted to `rows`.
    pub fn fit(
        x: &DMatrix<f64>,
        r: &[f64],
        rows: Vec<usize>,
        max_depth: Option<usize>,
        min_leaf: usize,
    ) -> Self {
        Self {
            root: grow(x, r, rows, 0, max_depth, min_leaf),
        }
    }

    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[(row, *feature)] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    pub fn leaves(&self) -> usize {
        fn l(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => l(left) + l(right),
            }
        }
        l(&self.root)
    }
}

fn mean_of(r: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn grow(
    x: &DMatrix<f64>,
    r: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
) -> TreeNode {
    let value = mean_of(r, &rows);
    let n = rows.len();
    if max_depth.is_some_and(|m| depth >= m) || n < 2 * min_leaf {
        return TreeNode::Leaf { value };
    }
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let sse: f64 = rows.iter().map(|&i| (r[i] - value).powi(2)).sum();
    if sse <= 0.0 {
        return TreeNode::Leaf { value };
    }
    let parent_term = total * total / n as f64;
    let mut best: Option<BestSplit> = None;
    let mut sorted = rows.clone();
    for f in 0..x.ncols() {
        sorted.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += r[sorted[k]];
            let nl = k + 1;
            let nr = n - nl;
            let (xa, xb) = (x[(sorted[k], f)], x[(sorted[k + 1], f)]);
            if xa == xb || nl < min_leaf || nr < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            // SSE reduction = Σ_l²/n_l + Σ_r²/n_r − Σ²/n
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64
                - parent_term;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = 0.5 * (xa + xb);
                if !(threshold >= xa && threshold < xb) {
                    threshold = xa;
                }
                best = Some(BestSplit {
                    gain,
                    feature: f,
                    threshold,
                });
            }
        }
    }
    let Some(b) = best.filter(|b| b.gain > 0.0) else {
        return TreeNode::Leaf { value };
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| x[(i, b.feature)] <= b.threshold);
    TreeNode::Split {
        feature: b.feature,
        threshold: b.threshold,
        left: Box::new(grow(x, r, left, depth + 1, max_depth, min_leaf)),
        right: Box::new(grow(x, r, right, depth + 1, max_depth, min_leaf)),
    }
}

/// `F(x) = base + η·Σ treeₜ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub n_features: usize,
    pub base: f64,
    pub trees: Vec<RegressionTree>,
}

pub fn gbt_train(x: &DMatrix<f64>, y: &DVector<f64>, params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.nrows() < 2 * params.min_samples_leaf {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot hold two leaves of {} samples",
            x.nrows(),
            params.min_samples_leaf
        )));
    }
    let n = x.nrows();
    let base = y.mean();
    let mut pred = vec![base; n];
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        let resid: Vec<f64> = (0..n).map(|i| y[i] - pred[i]).collect();
        if resid.iter().all(|&v| v == 0.0) {
            break;
        }
        let tree = RegressionTree::fit(
            x,
            &resid,
            (0..n).collect(),
            params.max_depth,
            params.min_samples_leaf,
        );
        if matches!(tree.root, TreeNode::Leaf { value } if value == 0.0) {
            break;
        }
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x, i);
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        params: *params,
        n_features: x.ncols(),
        base,
        trees,
    })
}

pub fn gbt_predict(model: &GbtModel, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.ncols() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            got: x.ncols(),
        });
    }
    Ok(DVector::from_fn(x.nrows(), |i, _| {
        model.base
            + model.params.learning_rate
                * model.trees.iter().map(|t| t.predict_row(x, i)).sum::<f64>()
    }))
}

/// [`Regressor`] front end for [`GbtModel`].
#[derive(Debug, Clone, Default)]
pub struct Gbt {
    pub params: GbtParams,
    pub model: Option<GbtModel>,
}

impl Gbt {
    pub fn new(params: GbtParams) -> Self {
        Self {
            params,
            model: None,
        }
    }
}

impl Regressor for Gbt {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        self.model = Some(gbt_train(x, y, &self.params)?);
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        gbt_predict(self.model.as_ref().ok_or(Error::NotFitted)?, x)
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }

    fn name(&self) -> String {
        "gbt".into()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::to_value(self.params).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_element(4, 2.5);
        let m = gbt_train(&x, &y, &GbtParams::default()).unwrap();
        assert!(m.trees.is_empty());
        assert!(gbt_predict(&m, &x).unwrap().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn depth_bound() {
        let x = DMatrix::from_fn(32, 1, |r, _| r as f64);
        let y = DVector::from_fn(32, |r, _| ((r * 7) % 5) as f64);
        let m = gbt_train(
            &x,
            &y,
            &GbtParams {
                rounds: 3,
                max_depth: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 2 && t.leaves() <= 4));
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        let p = GbtParams {
            min_samples_leaf: 2,
            ..Default::default()
        };
        assert!(gbt_train(&x, &y, &p).is_err());
    }
}
