//! Genetic-programming search over pipeline trees.

use std::collections::HashMap;
use std::io::Write;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbt::GbtParams;
use super::tree::{EstimatorSpec, FeatureNode, PipelineRegressor, PipelineTree, MAX_PIPELINE_DEPTH};
use crate::error::{Error, Result};
use crate::knn::{KnnConfig, Metric, Search, Weighting};
use crate::model::{cross_validate, Xy};
use crate::scaler::ScalerKind;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    IqrScaler,
    StandardScaler,
    StackingGbt,
    StackingKnn,
    FeatureUnion,
    KnnRegressor,
    GbtRegressor,
}

impl NodeKind {
    pub const ALL: [NodeKind; 7] = [
        NodeKind::IqrScaler,
        NodeKind::StandardScaler,
        NodeKind::StackingGbt,
        NodeKind::StackingKnn,
        NodeKind::FeatureUnion,
        NodeKind::KnnRegressor,
        NodeKind::GbtRegressor,
    ];

    pub fn is_estimator(self) -> bool {
        matches!(self, NodeKind::KnnRegressor | NodeKind::GbtRegressor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub tournament_size: usize,
    pub cv_folds: usize,
    pub seed: u64,
    pub elitism: usize,
    pub max_depth: usize,
    pub registry: Vec<NodeKind>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population: 24,
            generations: 50,
            mutation_rate: 0.85,
            crossover_rate: 0.15,
            tournament_size: 3,
            cv_folds: 5,
            seed: 0,
            elitism: 1,
            max_depth: MAX_PIPELINE_DEPTH,
            registry: NodeKind::ALL.to_vec(),
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) || !(0.0..=1.0).contains(&self.crossover_rate)
        {
            return bad("mutation and crossover rates must lie in [0, 1]");
        }
        if self.tournament_size == 0 {
            return bad("tournament size must be at least 1");
        }
        if self.elitism == 0 || self.elitism > self.population {
            return bad("elitism must be between 1 and the population size");
        }
        if self.max_depth > MAX_PIPELINE_DEPTH {
            return bad("max_depth exceeds the pipeline depth limit");
        }
        if !self.registry.iter().any(|k| k.is_estimator()) {
            return bad("registry holds no estimator");
        }
        Ok(())
    }
}

/// Small fixed hyperparameter menus sampled by the search.
const KNN_K: [usize; 5] = [1, 2, 3, 4, 5];
const KNN_P: [f64; 3] = [1.0, 2.0, 4.0];
const GBT_ROUNDS: [usize; 2] = [20, 50];
const GBT_DEPTH: [usize; 3] = [2, 3, 4];
const GBT_ETA: [f64; 2] = [0.1, 0.3];

fn random_knn(rng: &mut ChaCha8Rng) -> KnnConfig {
    KnnConfig {
        k: *KNN_K.choose(rng).unwrap(),
        metric: Metric::Minkowski {
            p: *KNN_P.choose(rng).unwrap(),
        },
        weighting: if rng.random_bool(0.5) {
            Weighting::Uniform
        } else {
            Weighting::InverseDistance
        },
        search: Search::Brute,
    }
}

fn random_gbt(rng: &mut ChaCha8Rng) -> GbtParams {
    GbtParams {
        rounds: *GBT_ROUNDS.choose(rng).unwrap(),
        learning_rate: *GBT_ETA.choose(rng).unwrap(),
        max_depth: Some(*GBT_DEPTH.choose(rng).unwrap()),
        min_samples_leaf: 1,
    }
}

struct Generator<'a> {
    estimators: Vec<NodeKind>,
    transformers: Vec<NodeKind>,
    config: &'a GpConfig,
}

impl<'a> Generator<'a> {
    fn new(config: &'a GpConfig) -> Self {
        let mut estimators = Vec::new();
        let mut transformers = Vec::new();
        for &k in &config.registry {
            let list = if k.is_estimator() {
                &mut estimators
            } else {
                &mut transformers
            };
            if !list.contains(&k) {
                list.push(k);
            }
        }
        Self {
            estimators,
            transformers,
            config,
        }
    }

    fn estimator(&self, rng: &mut ChaCha8Rng) -> EstimatorSpec {
        match self.estimators.choose(rng).unwrap() {
            NodeKind::KnnRegressor => EstimatorSpec::Knn(random_knn(rng)),
            _ => EstimatorSpec::Gbt(random_gbt(rng)),
        }
    }

    /// Random feature subtree no deeper than `budget`.
    fn features(&self, rng: &mut ChaCha8Rng, budget: usize) -> FeatureNode {
        if budget == 0 || self.transformers.is_empty() {
            return FeatureNode::Input;
        }
        // one extra slot for stopping at the raw input
        let pick = rng.random_range(0..=self.transformers.len());
        let Some(&kind) = self.transformers.get(pick) else {
            return FeatureNode::Input;
        };
        match kind {
            NodeKind::IqrScaler => FeatureNode::Scaler {
                scaler: ScalerKind::IqrRobust,
                input: Box::new(self.features(rng, budget - 1)),
            },
            NodeKind::StandardScaler => FeatureNode::Scaler {
                scaler: ScalerKind::Standard,
                input: Box::new(self.features(rng, budget - 1)),
            },
            NodeKind::StackingGbt => {
                let inner = EstimatorSpec::Gbt(random_gbt(rng));
                FeatureNode::Stacking {
                    inner,
                    input: Box::new(self.features(rng, budget - 1)),
                }
            }
            NodeKind::StackingKnn => {
                let inner = EstimatorSpec::Knn(random_knn(rng));
                FeatureNode::Stacking {
                    inner,
                    input: Box::new(self.features(rng, budget - 1)),
                }
            }
            _ => {
                let left = Box::new(self.features(rng, budget - 1));
                let right = Box::new(self.features(rng, budget - 1));
                FeatureNode::Union { left, right }
            }
        }
    }

    fn individual(&self, rng: &mut ChaCha8Rng) -> PipelineTree {
        let estimator = self.estimator(rng);
        let features = self.features(rng, self.config.max_depth);
        PipelineTree {
            estimator,
            features,
        }
    }

    /// Replaces the estimator or one feature node with a fresh random one.
    fn mutate(&self, tree: &mut PipelineTree, rng: &mut ChaCha8Rng) {
        let paths = tree.features.paths();
        let slot = rng.random_range(0..=paths.len());
        if slot == paths.len() {
            tree.estimator = self.estimator(rng);
            return;
        }
        let path = &paths[slot];
        let budget = self.config.max_depth - path.len();
        let node = self.features(rng, budget);
        if let Some(target) = tree.features.at_mut(path) {
            *target = node;
        }
    }

    /// Child of `a` with one subtree (or the estimator) taken from `b`.
    fn crossover(&self, a: &PipelineTree, b: &PipelineTree, rng: &mut ChaCha8Rng) -> PipelineTree {
        let mut child = a.clone();
        let pa = a.features.paths();
        let pb = b.features.paths();
        let slot = rng.random_range(0..=pa.len());
        if slot == pa.len() {
            child.estimator = b.estimator.clone();
            return child;
        }
        let at = &pa[slot];
        let fits: Vec<&Vec<usize>> = pb
            .iter()
            .filter(|p| at.len() + b.features.at(p).map_or(0, FeatureNode::depth) <= self.config.max_depth)
            .collect();
        if let Some(p) = fits.choose(rng) {
            let donor = b.features.at(p).cloned().unwrap_or(FeatureNode::Input);
            if let Some(target) = child.features.at_mut(at) {
                *target = donor;
            }
        }
        child
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best fitness found so far.
    pub best_mse: f64,
    /// Mean over the generation's finite fitnesses.
    pub mean_mse: f64,
}

pub fn write_fitness_csv(history: &[GenerationRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "generation,best_mse,mean_mse")?;
    for r in history {
        writeln!(w, "{},{:e},{:e}", r.generation, r.best_mse, r.mean_mse)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpResult {
    pub best: PipelineTree,
    pub best_mse: f64,
    pub history: Vec<GenerationRecord>,
    /// Every generation's population, in evaluation order.
    #[serde(skip)]
    pub populations: Vec<Vec<PipelineTree>>,
    pub evaluations: usize,
}

/// Mean k-fold MSE of a pipeline; any failure scores `+∞`.
pub fn pipeline_fitness(tree: &PipelineTree, data: &Xy, folds: usize, seed: u64) -> f64 {
    match cross_validate(|| PipelineRegressor::new(tree.clone()), data, folds, seed) {
        Ok(cv) if cv.mean_mse.is_finite() => cv.mean_mse,
        Ok(_) => f64::INFINITY,
        Err(e) => {
            debug!("pipeline {tree} failed: {e}");
            f64::INFINITY
        }
    }
}

fn tournament(fitness: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Generational search. Fitness is cached per distinct pipeline, so elites
/// keep their score and the best fitness never increases.
pub fn gp_search(config: &GpConfig, data: &Xy) -> Result<GpResult> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let gen = Generator::new(config);
    let mut rng = seeded_rng(config.seed);
    let mut cache: HashMap<String, f64> = HashMap::new();
    let mut population: Vec<PipelineTree> =
        (0..config.population).map(|_| gen.individual(&mut rng)).collect();
    let mut history = Vec::with_capacity(config.generations + 1);
    let mut populations = Vec::new();
    let mut best: Option<(PipelineTree, f64)> = None;
    for generation in 0..=config.generations {
        let keys: Vec<String> = population
            .iter()
            .map(|t| serde_json::to_string(t).expect("pipeline serialises"))
            .collect();
        let mut fresh: Vec<(String, &PipelineTree)> = Vec::new();
        for (k, t) in keys.iter().zip(&population) {
            if !cache.contains_key(k) && !fresh.iter().any(|(f, _)| f == k) {
                fresh.push((k.clone(), t));
            }
        }
        let scored: Vec<(String, f64)> = fresh
            .par_iter()
            .map(|(k, t)| (k.clone(), pipeline_fitness(t, data, config.cv_folds, config.seed)))
            .collect();
        cache.extend(scored);
        let fitness: Vec<f64> = keys.iter().map(|k| cache[k]).collect();
        for (t, &f) in population.iter().zip(&fitness) {
            if best.as_ref().is_none_or(|(_, b)| f < *b) {
                best = Some((t.clone(), f));
            }
        }
        let finite: Vec<f64> = fitness.iter().copied().filter(|f| f.is_finite()).collect();
        let mean_mse = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let best_mse = best.as_ref().map_or(f64::INFINITY, |b| b.1);
        debug!("generation {generation}: best {best_mse:e}, mean {mean_mse:e}");
        history.push(GenerationRecord {
            generation,
            best_mse,
            mean_mse,
        });
        populations.push(population.clone());
        if generation == config.generations {
            break;
        }

        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let mut next: Vec<PipelineTree> = order[..config.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < config.population {
            let a = tournament(&fitness, config.tournament_size, &mut rng);
            let mut child = if rng.random_bool(config.crossover_rate) {
                let b = tournament(&fitness, config.tournament_size, &mut rng);
                gen.crossover(&population[a], &population[b], &mut rng)
            } else {
                population[a].clone()
            };
            if rng.random_bool(config.mutation_rate) {
                gen.mutate(&mut child, &mut rng);
            }
            next.push(child);
        }
        population = next;
    }
    let (best, best_mse) = best.expect("population is non-empty");
    Ok(GpResult {
        best,
        best_mse,
        history,
        populations,
        evaluations: cache.len(),
    })
}

/// Benchmark data on which tree boosting beats neighbour averaging: the
/// target is a four-level step in `x₀ ∈ [0, 1]`, and `x₁ ∈ [0, 100]` is an
/// irrelevant feature that dominates raw distances.
pub fn step_benchmark(n: usize, seed: u64) -> Result<Xy> {
    let mut rng = seeded_rng(seed);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let a: f64 = rng.random_range(0.0..1.0);
        x[(i, 0)] = a;
        x[(i, 1)] = rng.random_range(0.0..100.0);
        y[i] = (4.0 * a).floor().min(3.0);
    }
    Xy::new(x, y)
}

/// Every pipeline of depth ≤ 1 over `registry`, with default
/// hyperparameters on each node.
pub fn enumerate_depth1(registry: &[NodeKind]) -> Vec<PipelineTree> {
    let estimators: Vec<EstimatorSpec> = registry
        .iter()
        .filter_map(|k| match k {
            NodeKind::KnnRegressor => Some(EstimatorSpec::Knn(KnnConfig::default())),
            NodeKind::GbtRegressor => Some(EstimatorSpec::Gbt(GbtParams::default())),
            _ => None,
        })
        .collect();
    let input = || Box::new(FeatureNode::Input);
    let mut features = vec![FeatureNode::Input];
    for k in registry {
        features.push(match k {
            NodeKind::IqrScaler => FeatureNode::Scaler {
                scaler: ScalerKind::IqrRobust,
                input: input(),
            },
            NodeKind::StandardScaler => FeatureNode::Scaler {
                scaler: ScalerKind::Standard,
                input: input(),
            },
            NodeKind::StackingGbt => FeatureNode::Stacking {
                inner: EstimatorSpec::Gbt(GbtParams::default()),
                input: input(),
            },
            NodeKind::StackingKnn => FeatureNode::Stacking {
                inner: EstimatorSpec::Knn(KnnConfig::default()),
                input: input(),
            },
            NodeKind::FeatureUnion => FeatureNode::Union {
                left: input(),
                right: input(),
            },
            _ => continue,
        });
    }
    let mut out = Vec::new();
    for e in &estimators {
        for f in &features {
            out.push(PipelineTree {
                estimator: e.clone(),
                features: f.clone(),
            });
        }
    }
    out
}
