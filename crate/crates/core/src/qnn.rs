//! Single-qumode variational circuit regressor.
//!
//! Inputs are encoded as a displaced squeezed state (voltage drives the
//! displacement, illumination the squeezing), pushed through a stack of
//! `R → S → R → D → K` layers on a truncated Fock space, and read out as
//! `⟨x̂⟩`. Training uses central finite differences and Adam.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{IvDataset, IvSample};
use crate::error::{Error, Result};
use crate::fock::{CVector, FockSpace, GateOp, DEFAULT_CUTOFF};
use crate::model::Regressor;
use crate::seeded_rng;

pub const PARAMS_PER_LAYER: usize = 5;
pub const ALPHA_RANGE: (f64, f64) = (-1.1, 1.0);
pub const SQUEEZE_RANGE: (f64, f64) = (0.0, 0.8);

/// Gate parameters of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QnnLayerParams {
    pub theta1: f64,
    pub r: f64,
    pub theta2: f64,
    pub d: f64,
    pub kappa: f64,
}

impl QnnLayerParams {
    pub fn to_array(&self) -> [f64; PARAMS_PER_LAYER] {
        [self.theta1, self.r, self.theta2, self.d, self.kappa]
    }

    pub fn from_array(a: [f64; PARAMS_PER_LAYER]) -> Self {
        Self {
            theta1: a[0],
            r: a[1],
            theta2: a[2],
            d: a[3],
            kappa: a[4],
        }
    }

    fn get(&self, k: usize) -> f64 {
        self.to_array()[k]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// How voltages become displacement amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingMode {
    /// Min-max onto `[−1.1, 1]`, sign kept.
    #[default]
    Signed,
    /// As `Signed`, then the magnitude is taken.
    Absolute,
}

/// Min-max map from `[from_min, from_max]` onto `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub from_min: f64,
    pub from_max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl LinearMap {
    pub fn fit(values: impl IntoIterator<Item = f64>, lo: f64, hi: f64) -> Result<Self> {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if !v.is_finite() {
                return Err(Error::InvalidArgument("non-finite value in encoder fit".into()));
            }
            min = min.min(v);
            max = max.max(v);
        }
        if min > max {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            from_min: min,
            from_max: max,
            lo,
            hi,
        })
    }

    /// Constant training columns map everything to `lo`.
    pub fn apply(&self, v: f64) -> f64 {
        let span = self.from_max - self.from_min;
        if span == 0.0 {
            return self.lo;
        }
        self.lo + (v - self.from_min) / span * (self.hi - self.lo)
    }

    pub fn in_range(&self, v: f64) -> bool {
        v >= self.from_min && v <= self.from_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub alpha: f64,
    pub r: f64,
    /// Set when the raw sample lies outside the fitted range.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub voltage: LinearMap,
    pub intensity: LinearMap,
    pub mode: EncodingMode,
}

impl Encoder {
    /// Fits both maps on the `(voltage, intensity)` rows given.
    pub fn fit(rows: &[(f64, f64)], mode: EncodingMode) -> Result<Self> {
        Ok(Self {
            voltage: LinearMap::fit(rows.iter().map(|r| r.0), ALPHA_RANGE.0, ALPHA_RANGE.1)?,
            intensity: LinearMap::fit(rows.iter().map(|r| r.1), SQUEEZE_RANGE.0, SQUEEZE_RANGE.1)?,
            mode,
        })
    }

    pub fn fit_dataset(ds: &IvDataset, mode: EncodingMode) -> Result<Self> {
        let rows: Vec<(f64, f64)> = ds.samples().iter().map(|s| (s.voltage, s.intensity)).collect();
        Self::fit(&rows, mode)
    }

    pub fn encode_pair(&self, voltage: f64, intensity: f64) -> EncodedInput {
        let mut alpha = self.voltage.apply(voltage);
        if self.mode == EncodingMode::Absolute {
            alpha = alpha.abs();
        }
        let extrapolated = !(self.voltage.in_range(voltage) && self.intensity.in_range(intensity));
        if extrapolated {
            log::debug!("encoding V = {voltage}, P = {intensity} outside the fitted range");
        }
        EncodedInput {
            alpha,
            // squeezing magnitudes cannot go negative
            r: self.intensity.apply(intensity).max(0.0),
            extrapolated,
        }
    }

    pub fn encode(&self, s: &IvSample) -> EncodedInput {
        self.encode_pair(s.voltage, s.intensity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QnnConfig {
    pub layers: usize,
    pub cutoff: usize,
    /// Weight of the trace penalty.
    pub lambda: f64,
    pub target_scale: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_std: f64,
    pub seed: u64,
    pub fd_step: f64,
    /// Training aborts when any training state's trace drops below this.
    pub trace_floor: f64,
    pub encoding: EncodingMode,
    /// When set, a per-gate norm leak above this fails the forward pass.
    pub layer_leak_tolerance: Option<f64>,
}

impl Default for QnnConfig {
    fn default() -> Self {
        Self {
            layers: 8,
            cutoff: DEFAULT_CUTOFF,
            lambda: 0.01,
            target_scale: 1e3,
            learning_rate: 0.003,
            batch_size: 32,
            epochs: 200,
            init_std: 1e-3,
            seed: 0,
            fd_step: 1e-3,
            trace_floor: 0.9,
            encoding: EncodingMode::Signed,
            layer_leak_tolerance: None,
        }
    }
}

impl QnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.layers == 0 {
            return bad("at least one layer is required");
        }
        if self.cutoff < 2 {
            return bad("cutoff must be at least 2");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.target_scale > 0.0 && self.target_scale.is_finite()) {
            return bad("target scale must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad("init std must be finite and non-negative");
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad("finite-difference step must be positive");
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers * PARAMS_PER_LAYER
    }
}

/// Trained or initial circuit together with everything needed to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub config: QnnConfig,
    pub layers: Vec<QnnLayerParams>,
    pub encoder: Option<Encoder>,
}

impl QnnModel {
    pub fn zeros(config: QnnConfig) -> Self {
        let layers = vec![QnnLayerParams::default(); config.layers];
        Self {
            config,
            layers,
            encoder: None,
        }
    }

    /// Gaussian initialisation with the configured std and seed.
    pub fn init(config: QnnConfig) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, config.init_std)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seeded_rng(config.seed);
        let layers = (0..config.layers)
            .map(|_| {
                let mut a = [0.0; PARAMS_PER_LAYER];
                for v in a.iter_mut() {
                    *v = normal.sample(&mut rng);
                }
                QnnLayerParams::from_array(a)
            })
            .collect();
        Ok(Self {
            config,
            layers,
            encoder: None,
        })
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.to_array()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.layers.len() * PARAMS_PER_LAYER {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len() * PARAMS_PER_LAYER,
                got: p.len(),
            });
        }
        for (l, chunk) in self.layers.iter_mut().zip(p.chunks(PARAMS_PER_LAYER)) {
            *l = QnnLayerParams::from_array(chunk.try_into().expect("chunk of five"));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<FockSpace> {
        FockSpace::new(self.config.cutoff)
    }
}

fn gate(space: &FockSpace, k: usize, v: f64) -> GateOp {
    match k {
        0 | 2 => GateOp::Diagonal(space.rotation_phases(v)),
        1 => GateOp::Dense(space.squeezing_matrix(v, 0.0)),
        3 => GateOp::Dense(space.displacement_matrix(Complex64::new(v, 0.0))),
        _ => GateOp::Diagonal(space.kerr_phases(v)),
    }
}

/// Concrete operators of one layer, in application order.
#[derive(Debug, Clone)]
pub struct LayerOps(pub [GateOp; PARAMS_PER_LAYER]);

impl LayerOps {
    pub fn build(space: &FockSpace, p: &QnnLayerParams) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::Domain("non-finite layer parameter".into()));
        }
        Ok(Self(std::array::from_fn(|k| gate(space, k, p.get(k)))))
    }

    fn apply(&self, psi: &mut CVector, scratch: &mut CVector, leak_tol: Option<f64>) -> Result<()> {
        for op in &self.0 {
            let before = if leak_tol.is_some() { psi.norm_squared() } else { 0.0 };
            op.apply_into(psi, scratch);
            std::mem::swap(psi, scratch);
            if let Some(tol) = leak_tol {
                let leak = before - psi.norm_squared();
                if leak > tol {
                    return Err(Error::Truncation { leak, tolerance: tol });
                }
            }
        }
        Ok(())
    }
}

pub fn build_layers(space: &FockSpace, layers: &[QnnLayerParams]) -> Result<Vec<LayerOps>> {
    layers
        .iter()
        .enumerate()
        .map(|(i, p)| LayerOps::build(space, p).map_err(|e| layer_err(i, e)))
        .collect()
}

fn layer_err(layer: usize, e: Error) -> Error {
    Error::Layer {
        layer,
        source: Box::new(e),
    }
}

/// `|α, r⟩ = D(α)S(r)|0⟩` on the truncated space.
pub fn encode_state(space: &FockSpace, input: &EncodedInput) -> CVector {
    let mut psi = space.vacuum().amplitudes;
    if input.r != 0.0 {
        psi = space.squeezing_matrix(input.r, 0.0) * psi;
    }
    if input.alpha != 0.0 {
        psi = space.displacement_matrix(Complex64::new(input.alpha, 0.0)) * psi;
    }
    psi
}

/// `⟨ψ|x̂|ψ⟩` with `x̂ = a + a†` truncated.
pub fn x_expectation(psi: &CVector) -> f64 {
    let mut s = 0.0;
    for n in 1..psi.len() {
        s += (psi[n - 1].conj() * psi[n]).re * (n as f64).sqrt();
    }
    2.0 * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardOutput {
    pub expectation: f64,
    pub trace: f64,
}

/// Runs `layers[from..]` on `psi`, returning the final readout.
fn run_from(
    ops: &[LayerOps],
    from: usize,
    psi: &mut CVector,
    leak_tol: Option<f64>,
) -> Result<ForwardOutput> {
    let mut scratch = CVector::zeros(psi.len());
    for (i, l) in ops.iter().enumerate().skip(from) {
        l.apply(psi, &mut scratch, leak_tol).map_err(|e| layer_err(i, e))?;
    }
    Ok(ForwardOutput {
        expectation: x_expectation(psi),
        trace: psi.norm_squared(),
    })
}

/// Circuit output for one encoded state.
pub fn forward_state(model: &QnnModel, space: &FockSpace, psi: &CVector) -> Result<ForwardOutput> {
    let ops = build_layers(space, &model.layers)?;
    let mut psi = psi.clone();
    run_from(&ops, 0, &mut psi, model.config.layer_leak_tolerance)
}

/// Circuit output state for one encoded state, unnormalised.
pub fn output_state(model: &QnnModel, space: &FockSpace, psi: &CVector) -> Result<CVector> {
    let ops = build_layers(space, &model.layers)?;
    let mut psi = psi.clone();
    run_from(&ops, 0, &mut psi, model.config.layer_leak_tolerance)?;
    Ok(psi)
}

pub fn forward(model: &QnnModel, input: &EncodedInput) -> Result<ForwardOutput> {
    let space = model.space()?;
    forward_state(model, &space, &encode_state(&space, input))
}

/// Encoded states with scaled targets.
#[derive(Debug, Clone)]
pub struct QnnBatch {
    pub states: Vec<CVector>,
    pub targets: Vec<f64>,
}

impl QnnBatch {
    pub fn new(states: Vec<CVector>, targets: Vec<f64>) -> Result<Self> {
        if states.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: targets.len(),
            });
        }
        Ok(Self { states, targets })
    }

    /// Encodes `ds` with `enc` and multiplies currents by `target_scale`.
    pub fn from_dataset(
        space: &FockSpace,
        enc: &Encoder,
        ds: &IvDataset,
        target_scale: f64,
    ) -> Self {
        let states = ds
            .samples()
            .par_iter()
            .map(|s| encode_state(space, &enc.encode(s)))
            .collect();
        let targets = ds.samples().iter().map(|s| s.current * target_scale).collect();
        Self { states, targets }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            states: idx.iter().map(|&i| self.states[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub mse: f64,
    pub min_trace: f64,
}

fn loss_with(
    ops: &[LayerOps],
    from: usize,
    starts: &[CVector],
    targets: &[f64],
    lambda: f64,
    leak_tol: Option<f64>,
) -> Result<LossValue> {
    let outs: Vec<ForwardOutput> = starts
        .iter()
        .map(|s| {
            let mut psi = s.clone();
            run_from(ops, from, &mut psi, leak_tol)
        })
        .collect::<Result<_>>()?;
    Ok(combine(&outs, targets, lambda))
}

fn combine(outs: &[ForwardOutput], targets: &[f64], lambda: f64) -> LossValue {
    let m = outs.len() as f64;
    let mse = outs
        .iter()
        .zip(targets)
        .map(|(o, y)| (y - o.expectation).powi(2))
        .sum::<f64>()
        / m;
    let penalty = outs.iter().map(|o| 1.0 - o.trace).sum::<f64>() / m;
    LossValue {
        loss: mse + lambda * penalty,
        mse,
        min_trace: outs.iter().map(|o| o.trace).fold(f64::INFINITY, f64::min),
    }
}

/// Mean squared error plus `λ·mean(1 − trace)`.
pub fn loss(model: &QnnModel, batch: &QnnBatch) -> Result<LossValue> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let space = model.space()?;
    let ops = build_layers(&space, &model.layers)?;
    let leak_tol = model.config.layer_leak_tolerance;
    let outs: Vec<ForwardOutput> = batch
        .states
        .par_iter()
        .map(|s| run_from(&ops, 0, &mut s.clone(), leak_tol))
        .collect::<Result<_>>()?;
    Ok(combine(&outs, &batch.targets, model.config.lambda))
}

/// Central finite-difference gradient, flattened layer by layer.
pub fn gradient(model: &QnnModel, space: &FockSpace, batch: &QnnBatch, h: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let leak_tol = model.config.layer_leak_tolerance;
    let base = build_layers(space, &model.layers)?;
    // states entering each layer under the base parameters
    let mut prefix: Vec<Vec<CVector>> = Vec::with_capacity(base.len());
    let mut current = batch.states.clone();
    let mut scratch = CVector::zeros(space.dim());
    for (i, l) in base.iter().enumerate() {
        prefix.push(current.clone());
        for psi in current.iter_mut() {
            l.apply(psi, &mut scratch, leak_tol).map_err(|e| layer_err(i, e))?;
        }
    }
    let n = model.layers.len() * PARAMS_PER_LAYER;
    let evals: Vec<f64> = (0..2 * n)
        .into_par_iter()
        .map(|j| {
            let (idx, sign) = (j / 2, if j % 2 == 0 { 1.0 } else { -1.0 });
            let (l, k) = (idx / PARAMS_PER_LAYER, idx % PARAMS_PER_LAYER);
            let v = model.layers[l].get(k) + sign * h;
            if !v.is_finite() {
                return Err(layer_err(l, Error::Domain("non-finite layer parameter".into())));
            }
            let mut ops = base.clone();
            ops[l].0[k] = gate(space, k, v);
            loss_with(&ops, l, &prefix[l], &batch.targets, model.config.lambda, leak_tol)
                .map(|v| v.loss)
        })
        .collect::<Result<_>>()?;
    Ok(evals.chunks(2).map(|c| (c[0] - c[1]) / (2.0 * h)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QnnEpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub min_trace: f64,
}

pub fn write_history_csv(history: &[QnnEpochRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "epoch,train_loss,test_loss,min_trace")?;
    for r in history {
        let test = r.test_loss.map(|v| format!("{v:e}")).unwrap_or_default();
        writeln!(w, "{},{:e},{},{}", r.epoch, r.train_loss, test, r.min_trace)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct QnnTrainOutcome {
    pub model: QnnModel,
    /// The untrained model, logged as epoch 0.
    pub initial: QnnEpochRecord,
    pub history: Vec<QnnEpochRecord>,
}

impl QnnTrainOutcome {
    /// Smallest training-set trace over every logged epoch, including 0.
    pub fn min_trace(&self) -> f64 {
        self.history
            .iter()
            .map(|r| r.min_trace)
            .fold(self.initial.min_trace, f64::min)
    }

    pub fn final_train_loss(&self) -> f64 {
        self.history.last().unwrap_or(&self.initial).train_loss
    }
}

struct FlatAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl FlatAdam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Minibatch Adam on finite-difference gradients, starting from `model`.
///
/// Losses and the minimum trace over the training set are recorded for the
/// initial model and after every epoch.
pub fn train_model(
    model: QnnModel,
    train: &QnnBatch,
    test: Option<&QnnBatch>,
) -> Result<QnnTrainOutcome> {
    train_model_observed(model, train, test, &mut |_| {})
}

/// As [`train_model`], calling `on_epoch` after every completed epoch so a
/// caller can keep the history of a run that later fails.
pub fn train_model_observed(
    mut model: QnnModel,
    train: &QnnBatch,
    test: Option<&QnnBatch>,
    on_epoch: &mut dyn FnMut(&QnnEpochRecord),
) -> Result<QnnTrainOutcome> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let space = model.space()?;
    let record = |model: &QnnModel, epoch: usize| -> Result<QnnEpochRecord> {
        let tr = loss(model, train)?;
        let te = match test {
            Some(t) if !t.is_empty() => Some(loss(model, t)?.loss),
            _ => None,
        };
        if !tr.loss.is_finite() || te.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        if tr.min_trace < cfg.trace_floor {
            return Err(Error::TraceCollapse {
                epoch,
                trace: tr.min_trace,
                threshold: cfg.trace_floor,
            });
        }
        Ok(QnnEpochRecord {
            epoch,
            train_loss: tr.loss,
            test_loss: te,
            min_trace: tr.min_trace,
        })
    };
    let initial = record(&model, 0)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut adam = FlatAdam::new(cfg.n_params());
    let mut rng = seeded_rng(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut params = model.params();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let g = gradient(&model, &space, &train.select(idx), cfg.fd_step)?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut params, &g, cfg.learning_rate);
            model.set_params(&params)?;
        }
        let r = record(&model, epoch)?;
        log::info!(
            "qnn epoch {epoch}: train {:.4e} min trace {:.5}",
            r.train_loss,
            r.min_trace
        );
        on_epoch(&r);
        history.push(r);
    }
    Ok(QnnTrainOutcome {
        model,
        initial,
        history,
    })
}

/// Fits the encoder on `train`, initialises and trains.
pub fn train(config: QnnConfig, train: &IvDataset, test: Option<&IvDataset>) -> Result<QnnTrainOutcome> {
    train_observed(config, train, test, &mut |_| {})
}

pub fn train_observed(
    config: QnnConfig,
    train: &IvDataset,
    test: Option<&IvDataset>,
    on_epoch: &mut dyn FnMut(&QnnEpochRecord),
) -> Result<QnnTrainOutcome> {
    let mut model = QnnModel::init(config)?;
    let enc = Encoder::fit_dataset(train, model.config.encoding)?;
    model.encoder = Some(enc);
    let space = model.space()?;
    let scale = model.config.target_scale;
    let tr = QnnBatch::from_dataset(&space, &enc, train, scale);
    let te = test.map(|t| QnnBatch::from_dataset(&space, &enc, t, scale));
    train_model_observed(model, &tr, te.as_ref(), on_epoch)
}

/// Unscaled current predictions for `(voltage, intensity)` rows.
pub fn predict_rows(model: &QnnModel, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let enc = model.encoder.as_ref().ok_or(Error::NotFitted)?;
    if x.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.ncols(),
        });
    }
    let space = model.space()?;
    let ops = build_layers(&space, &model.layers)?;
    let leak_tol = model.config.layer_leak_tolerance;
    let out: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let mut psi = encode_state(&space, &enc.encode_pair(x[(i, 0)], x[(i, 1)]));
            run_from(&ops, 0, &mut psi, leak_tol).map(|o| o.expectation / model.config.target_scale)
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(out))
}

/// [`Regressor`] adapter over `(voltage, intensity)` features.
#[derive(Debug, Clone)]
pub struct Qnn {
    pub config: QnnConfig,
    pub model: Option<QnnModel>,
    pub history: Vec<QnnEpochRecord>,
}

impl Qnn {
    pub fn new(config: QnnConfig) -> Self {
        Self {
            config,
            model: None,
            history: Vec::new(),
        }
    }
}

fn xy_dataset(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<IvDataset> {
    if x.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let samples = (0..x.nrows())
        .map(|i| IvSample::new(x[(i, 0)], x[(i, 1)], y[i]))
        .collect();
    IvDataset::new(samples, "in-memory")
}

impl Regressor for Qnn {
    fn fit(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        let ds = xy_dataset(x, y)?;
        let out = train(self.config.clone(), &ds, None)?;
        self.model = Some(out.model);
        self.history = out.history;
        Ok(())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        predict_rows(self.model.as_ref().ok_or(Error::NotFitted)?, x)
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }

    fn name(&self) -> String {
        "qnn".into()
    }

    fn hyperparameters(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).unwrap_or_default()
    }
}
