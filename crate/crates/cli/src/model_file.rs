//! On-disk model format shared by `train`, `compare` and `wigner`.

use std::path::Path;

use diodeq::knn::{Knn, KnnModel};
use diodeq::mlp::{Mlp, MlpConfig, MlpWeights};
use diodeq::model::{Regressor, Scaled, TargetScaled};
use diodeq::pipeline::{PipelineRegressor, PipelineTree};
use diodeq::qnn::{Qnn, QnnModel};
use diodeq::scaler::ScalerParams;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::failure::{CmdResult, Failure};
use crate::io::read_json;

pub const SCHEMA: &str = "diodeq-model/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SavedModel {
    Knn {
        scaler: ScalerParams,
        model: KnnModel,
    },
    Mlp {
        scaler: ScalerParams,
        /// Mean and standard deviation of the training targets.
        target: (f64, f64),
        config: MlpConfig,
        weights: MlpWeights,
    },
    /// Pipelines are refitted from their training rows when loaded; every
    /// stage is deterministic, so this reproduces the trained model.
    Pipeline {
        tree: PipelineTree,
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
    },
    Qnn {
        model: QnnModel,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub name: String,
    pub n_features: usize,
    pub seed: u64,
    pub model: SavedModel,
}

pub fn matrix_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

impl ModelFile {
    pub fn new(name: &str, n_features: usize, seed: u64, model: SavedModel) -> Self {
        Self {
            schema: SCHEMA.into(),
            name: name.into(),
            n_features,
            seed,
            model,
        }
    }

    pub fn load(path: &Path) -> CmdResult<Self> {
        let f: Self = read_json(path)?;
        if f.schema != SCHEMA {
            return Err(Failure::input(anyhow::anyhow!(
                "{}: unsupported model schema `{}` (expected `{SCHEMA}`)",
                path.display(),
                f.schema
            )));
        }
        Ok(f)
    }

    pub fn check_features(&self, got: usize) -> CmdResult<()> {
        if got != self.n_features {
            return Err(diodeq::Error::DimensionMismatch {
                expected: self.n_features,
                got,
            }
            .into());
        }
        Ok(())
    }

    pub fn regressor(&self) -> CmdResult<Box<dyn Regressor>> {
        Ok(match &self.model {
            SavedModel::Knn { scaler, model } => {
                let mut m = model.clone();
                m.rebuild_index();
                Box::new(Scaled {
                    kind: scaler.kind,
                    scaler: Some(scaler.clone()),
                    inner: Knn {
                        config: m.config,
                        model: Some(m),
                    },
                })
            }
            SavedModel::Mlp {
                scaler,
                target,
                config,
                weights,
            } => Box::new(Scaled {
                kind: scaler.kind,
                scaler: Some(scaler.clone()),
                inner: TargetScaled {
                    target_scale: Some(*target),
                    inner: Mlp {
                        config: config.clone(),
                        weights: Some(weights.clone()),
                        history: Vec::new(),
                    },
                },
            }),
            SavedModel::Pipeline {
                tree,
                train_x,
                train_y,
            } => {
                let n = train_y.len();
                if train_x.len() != n || train_x.iter().any(|r| r.len() != self.n_features) {
                    return Err(Failure::input_msg("pipeline training rows are malformed"));
                }
                let x = DMatrix::from_fn(n, self.n_features, |i, j| train_x[i][j]);
                let mut p = PipelineRegressor::new(tree.clone());
                p.fit(&x, &DVector::from_column_slice(train_y))?;
                Box::new(p)
            }
            SavedModel::Qnn { model } => {
                if model.encoder.is_none() {
                    return Err(Failure::input_msg("QNN model has no fitted encoder"));
                }
                Box::new(Qnn {
                    config: model.config.clone(),
                    model: Some(model.clone()),
                    history: Vec::new(),
                })
            }
        })
    }
}
