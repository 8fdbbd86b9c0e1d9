//! k-nearest-neighbour regression.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Regressor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Metric {
    Minkowski { p: f64 },
    Chebyshev,
}

impl Metric {
    pub fn exponent(&self) -> f64 {
        match self {
            Metric::Minkowski { p } => *p,
            Metric::Chebyshev => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Metric::Minkowski { p } if !(*p >= 1.0) => Err(Error::InvalidArgument(format!(
                "Minkowski exponent {p} must be >= 1"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    Brute,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: Metric,
    pub weighting: Weighting,
    pub search: Search,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 4,
            metric: Metric::Minkowski { p: 4.0 },
            weighting: Weighting::InverseDistance,
            search: Search::Brute,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        self.metric.validate()
    }
}

/// `(Σ|xᵢ−yᵢ|^p)^{1/p}`; `p = ∞` gives the Chebyshev distance.
pub fn minkowski_distance(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Minkowski exponent {p} must be >= 1"
        )));
    }
    Ok(distance(x, y, p))
}

fn distance(x: &[f64], y: &[f64], p: f64) -> f64 {
    let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
    if p.is_infinite() {
        diffs.fold(0.0, f64::max)
    } else if p == 1.0 {
        diffs.sum()
    } else if p == 2.0 {
        diffs.map(|d| d * d).sum::<f64>().sqrt()
    } else {
        diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// A neighbour candidate ordered by (distance, training index).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub distance: f64,
    pub index: usize,
}

impl Neighbour {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf(Vec<usize>),
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

const KD_LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
struct KdTree {
    root: KdNode,
}

impl KdTree {
    fn build(points: &[f64], dim: usize, n: usize) -> Self {
        let idx: Vec<usize> = (0..n).collect();
        Self {
            root: Self::build_node(points, dim, idx, 0),
        }
    }

    fn build_node(points: &[f64], dim: usize, mut idx: Vec<usize>, depth: usize) -> KdNode {
        if idx.len() <= KD_LEAF_SIZE || dim == 0 {
            return KdNode::Leaf(idx);
        }
        // split on the axis of largest spread
        let spread = |a: usize| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points[i * dim + a];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        };
        let axis = (0..dim)
            .max_by(|&a, &b| spread(a).total_cmp(&spread(b)).then(b.cmp(&a)))
            .unwrap_or(depth % dim);
        if spread(axis) == 0.0 {
            return KdNode::Leaf(idx);
        }
        idx.sort_by(|&a, &b| {
            points[a * dim + axis]
                .total_cmp(&points[b * dim + axis])
                .then(a.cmp(&b))
        });
        let mid = idx.len() / 2;
        let value = points[idx[mid] * dim + axis];
        let right = idx.split_off(mid);
        KdNode::Split {
            axis,
            value,
            left: Box::new(Self::build_node(points, dim, idx, depth + 1)),
            right: Box::new(Self::build_node(points, dim, right, depth + 1)),
        }
    }

    fn query(&self, points: &[f64], dim: usize, q: &[f64], k: usize, p: f64) -> Vec<Neighbour> {
        let mut best: Vec<Neighbour> = Vec::with_capacity(k + 1);
        Self::visit(&self.root, points, dim, q, k, p, &mut best);
        best
    }

    fn visit(
        node: &KdNode,
        points: &[f64],
        dim: usize,
        q: &[f64],
        k: usize,
        p: f64,
        best: &mut Vec<Neighbour>,
    ) {
        match node {
            KdNode::Leaf(idx) => {
                for &i in idx {
                    let cand = Neighbour {
                        distance: distance(q, &points[i * dim..(i + 1) * dim], p),
                        index: i,
                    };
                    insert_bounded(best, cand, k);
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                Self::visit(near, points, dim, q, k, p, best);
                // |Δ_axis| bounds every Minkowski distance from below; equality
                // must still be explored so that index tie-breaks agree with
                // brute force.
                if best.len() < k || diff.abs() <= best[best.len() - 1].distance {
                    Self::visit(far, points, dim, q, k, p, best);
                }
            }
        }
    }
}

fn insert_bounded(best: &mut Vec<Neighbour>, cand: Neighbour, k: usize) {
    if best.len() == k && cand.cmp_key(&best[k - 1]) != Ordering::Less {
        return;
    }
    let pos = best
        .binary_search_by(|b| b.cmp_key(&cand))
        .unwrap_or_else(|e| e);
    best.insert(pos, cand);
    best.truncate(k);
}

/// Fitted model: the training data stored verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub config: KnnConfig,
    pub dim: usize,
    /// Row-major training features.
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
    #[serde(skip)]
    tree: Option<KdTree>,
}

impl PartialEq for KnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.dim == other.dim
            && self.points == other.points
            && self.targets == other.targets
    }
}

impl KnnModel {
    pub fn fit(config: KnnConfig, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        config.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if config.k > x.nrows() {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds the {} training rows",
                config.k,
                x.nrows()
            )));
        }
        let dim = x.ncols();
        let points: Vec<f64> = x.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
        let mut m = Self {
            config,
            dim,
            points,
            targets: y.iter().copied().collect(),
            tree: None,
        };
        m.rebuild_index();
        Ok(m)
    }

    /// Rebuilds the search index, e.g. after deserialisation.
    pub fn rebuild_index(&mut self) {
        self.tree = match self.config.search {
            Search::KdTree => Some(KdTree::build(&self.points, self.dim, self.len())),
            Search::Brute => None,
        };
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` nearest training rows ordered by (distance, index).
    pub fn neighbours(&self, q: &[f64]) -> Result<Vec<Neighbour>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        let p = self.config.metric.exponent();
        let k = self.config.k;
        Ok(match (&self.tree, self.config.search) {
            (Some(tree), Search::KdTree) => tree.query(&self.points, self.dim, q, k, p),
            (None, Search::KdTree) => {
                KdTree::build(&self.points, self.dim, self.len()).query(&self.points, self.dim, q, k, p)
            }
            (_, Search::Brute) => {
                let mut all: Vec<Neighbour> = (0..self.len())
                    .map(|i| Neighbour {
                        distance: distance(q, self.row(i), p),
                        index: i,
                    })
                    .collect();
                all.sort_by(Neighbour::cmp_key);
                all.truncate(k);
                all
            }
        })
    }

    pub fn predict_one(&self, q: &[f64]) -> Result<f64> {
        let nb = self.neighbours(q)?;
        let exact: Vec<f64> = nb
            .iter()
            .filter(|n| n.distance == 0.0)
            .map(|n| self.targets[n.index])
            .collect();
        if !exact.is_empty() {
            return Ok(exact.iter().sum::<f64>() / exact.len() as f64);
        }
        Ok(match self.config.weighting {
            Weighting::Uniform => {
                nb.iter().map(|n| self.targets[n.index]).sum::<f64>() / nb.len() as f64
            }
            Weighting::InverseDistance => {
                let (num, den) = nb.iter().fold((0.0, 0.0), |(num, den), n| {
                    let w = 1.0 / n.distance;
                    (num + w * self.targets[n.index], den + w)
                });
                num / den
            }
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.ncols(),
            });
        }
        let mut out = DVector::zeros(x.nrows());
        let mut q = vec![0.0; self.dim];
        for (r, row) in x.row_iter().enumerate() {
            for (d, v) in q.iter_mut().zip(row.iter()) {
                *d = *v;
            }
            out[r] = self.predict_one(&q)?;
        }
        Ok(out)
    }
}

/// [`Regressor`] front end for [`KnnModel`].
#[derive(Debug, Clone)]
pub struct Knn {
    pub config: KnnConfig,
    pub model: Option<KnnModel>,
}

impl Knn {
    pub fn new(config: KnnConfig) -> Self {
        Self {
            config,
            model: None,
        }
    }
}

impl Regressor for Knn {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        self.model = Some(KnnModel::fit(self.config, x, y)?);
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.model.as_ref().ok_or(Error::NotFitted)?.predict(x)
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }

    fn name(&self) -> String {
        "knn".into()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::to_value(self.config).unwrap_or_default()
    }
}
