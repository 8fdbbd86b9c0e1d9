//! Modelling and characterisation of a UV photodiode's current as a
//! function of bias voltage and illumination.
//!
//! Four regressors share one contract ([`model::Regressor`]): a k-nearest
//! neighbour model ([`knn`]), a feed-forward network trained with Adam
//! ([`mlp`]), stacked gradient-boosting pipelines evolved by genetic
//! programming ([`pipeline`]), and a single-qumode continuous-variable
//! quantum neural network ([`qnn`]) running on a truncated Fock-space
//! simulator ([`fock`]). The [`physics`] module extracts diode parameters
//! and photodetector figures of merit from measured curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod fock;
pub mod knn;
pub mod mlp;
pub mod model;
pub mod physics;
pub mod pipeline;
pub mod qnn;
pub mod scaler;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG used throughout the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
