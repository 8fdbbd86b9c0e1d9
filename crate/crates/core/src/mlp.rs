//! Feed-forward network: ReLU hidden layers, linear output, MSE loss,
//! hand-written backpropagation and Adam.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mse, r2_score, FitReport, Regressor, Xy};
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Input size first, output size (1) last.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub init_std: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![2, 16, 32, 32, 16, 1],
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 200,
            seed: 0,
            init_std: 0.1,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::InvalidArgument(
                "network needs an input, at least one hidden layer and an output".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::InvalidArgument("init_std must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerJson {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// One affine map `x ↦ W·x + b`, `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LayerJson", try_from = "LayerJson")]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl From<Layer> for LayerJson {
    fn from(l: Layer) -> Self {
        Self {
            weights: l.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
            bias: l.b.iter().copied().collect(),
        }
    }
}

impl TryFrom<LayerJson> for Layer {
    type Error = String;
    fn try_from(j: LayerJson) -> std::result::Result<Self, String> {
        let rows = j.weights.len();
        let cols = j.weights.first().map_or(0, Vec::len);
        if j.weights.iter().any(|r| r.len() != cols) || j.bias.len() != rows {
            return Err("ragged layer weights".into());
        }
        let flat: Vec<f64> = j.weights.into_iter().flatten().collect();
        Ok(Self {
            w: DMatrix::from_row_slice(rows, cols, &flat),
            b: DVector::from_vec(j.bias),
        })
    }
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            w: DMatrix::zeros(self.w.nrows(), self.w.ncols()),
            b: DVector::zeros(self.b.len()),
        }
    }
}

/// Per-layer pre-activations and activations of a batch forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input batch; `activations[l+1]` the output of layer `l`.
    pub activations: Vec<DMatrix<f64>>,
    pub pre_activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("forward cache holds the input")
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

// derivative at 0 is taken as 0
fn relu_prime(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub layers: Vec<Layer>,
}

impl MlpWeights {
    /// Gaussian weights N(0, std²), zero biases.
    pub fn init(sizes: &[usize], std: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seeded_rng(seed);
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                w: DMatrix::from_fn(w[1], w[0], |_, _| normal.sample(&mut rng)),
                b: DVector::zeros(w[1]),
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    w: DMatrix::zeros(w[1], w[0]),
                    b: DVector::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.ncols())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass for a batch of rows.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_size() {
            return Err(Error::DimensionMismatch {
                expected: self.input_size(),
                got: x.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut activations = vec![x.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &activations[l] * layer.w.transpose();
            for mut row in z.row_iter_mut() {
                row += layer.b.transpose();
            }
            let a = if l == last { z.clone() } else { z.map(relu) };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let out = self.forward(x)?;
        Ok(out.output().column(0).into_owned())
    }

    /// Mean squared error over the batch.
    pub fn loss(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
        let p = self.predict(x)?;
        mse(y.as_slice(), p.as_slice())
    }

    /// Gradients of the batch-mean squared error for every weight and bias.
    pub fn backward(&self, cache: &ForwardCache, y: &DVector<f64>) -> Result<Vec<Layer>> {
        let out = cache.output();
        if out.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: out.nrows(),
                got: y.len(),
            });
        }
        let m = y.len() as f64;
        let mut delta = DMatrix::from_fn(out.nrows(), 1, |r, _| 2.0 / m * (out[(r, 0)] - y[r]));
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = delta.transpose() * &cache.activations[l];
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            grads.push(Layer { w: gw, b: gb });
            if l > 0 {
                let back = &delta * &self.layers[l].w;
                delta = back.zip_map(&cache.pre_activations[l - 1], |d, z| d * relu_prime(z));
            }
        }
        grads.reverse();
        Ok(grads)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
}

impl AdamState {
    pub fn new(weights: &MlpWeights) -> Self {
        let zeros: Vec<Layer> = weights.layers.iter().map(Layer::zeros_like).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, weights: &mut MlpWeights, grads: &[Layer], lr: f64) -> Result<()> {
        if grads.len() != weights.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.layers.len(),
                got: grads.len(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= lr * mhat / (vhat.sqrt() + eps);
        };
        for (l, g) in grads.iter().enumerate() {
            let layer = &mut weights.layers[l];
            if g.w.shape() != layer.w.shape() || g.b.len() != layer.b.len() {
                return Err(Error::DimensionMismatch {
                    expected: layer.w.len(),
                    got: g.w.len(),
                });
            }
            for i in 0..layer.w.len() {
                update(&mut layer.w[i], g.w[i], &mut self.m[l].w[i], &mut self.v[l].w[i]);
            }
            for i in 0..layer.b.len() {
                update(&mut layer.b[i], g.b[i], &mut self.m[l].b[i], &mut self.v[l].b[i]);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

pub fn write_history_csv(history: &[EpochRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "epoch,train_mse,test_mse")?;
    for r in history {
        match r.test_mse {
            Some(t) => writeln!(w, "{},{:e},{:e}", r.epoch, r.train_mse, t)?,
            None => writeln!(w, "{},{:e},", r.epoch, r.train_mse)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: MlpWeights,
    pub history: Vec<EpochRecord>,
    pub report: FitReport,
}

fn check_finite(v: f64, epoch: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence { epoch })
    }
}

/// Minibatch training with a seeded per-epoch shuffle.
pub fn train(config: &MlpConfig, train: &Xy, test: Option<&Xy>) -> Result<TrainOutcome> {
    train_observed(config, train, test, &mut |_| {})
}

/// As [`train`], calling `on_epoch` after every completed epoch.
pub fn train_observed(
    config: &MlpConfig,
    train: &Xy,
    test: Option<&Xy>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.x.ncols() != config.layer_sizes[0] || *config.layer_sizes.last().unwrap() != 1 {
        return Err(Error::DimensionMismatch {
            expected: config.layer_sizes[0],
            got: train.x.ncols(),
        });
    }
    let start = Instant::now();
    let mut weights = MlpWeights::init(&config.layer_sizes, config.init_std, config.seed)?;
    let mut adam = AdamState::new(&weights);
    let mut rng = seeded_rng(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xb = train.x.select_rows(batch);
            let yb = train.y.select_rows(batch);
            let cache = weights.forward(&xb)?;
            let grads = weights.backward(&cache, &yb)?;
            adam.step(&mut weights, &grads, config.learning_rate)?;
        }
        let train_mse = check_finite(weights.loss(&train.x, &train.y)?, epoch)?;
        let test_mse = match test {
            Some(t) => Some(check_finite(weights.loss(&t.x, &t.y)?, epoch)?),
            None => None,
        };
        let r = EpochRecord {
            epoch,
            train_mse,
            test_mse,
        };
        on_epoch(&r);
        history.push(r);
    }
    let train_pred = weights.predict(&train.x)?;
    let train_mse = mse(train.y.as_slice(), train_pred.as_slice())?;
    let (test_mse, r2) = match test {
        Some(t) => {
            let p = weights.predict(&t.x)?;
            (
                Some(mse(t.y.as_slice(), p.as_slice())?),
                r2_score(t.y.as_slice(), p.as_slice()).ok(),
            )
        }
        None => (None, r2_score(train.y.as_slice(), train_pred.as_slice()).ok()),
    };
    let report = FitReport {
        model: "mlp".into(),
        hyperparameters: serde_json::to_value(config)?,
        train_mse,
        test_mse,
        validation_mse: None,
        r2,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        weights,
        history,
        report,
    })
}

/// [`Regressor`] front end for the network.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub config: MlpConfig,
    pub weights: Option<MlpWeights>,
    pub history: Vec<EpochRecord>,
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Self {
        Self {
            config,
            weights: None,
            history: Vec::new(),
        }
    }
}

impl Regressor for Mlp {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        let data = Xy::new(x.clone(), y.clone())?;
        let out = train(&self.config, &data, None)?;
        self.weights = Some(out.weights);
        self.history = out.history;
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.weights.as_ref().ok_or(Error::NotFitted)?.predict(x)
    }

    fn is_fitted(&self) -> bool {
        self.weights.is_some()
    }

    fn name(&self) -> String {
        "mlp".into()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).unwrap_or_default()
    }
}
