//! Gradient-boosted trees, stacking and union transformers, and a
//! genetic-programming search over tree-shaped pipelines.

mod gbt;
mod gp;
mod tree;

pub use gbt::{gbt_predict, gbt_train, Gbt, GbtModel, GbtParams, RegressionTree, TreeNode};
pub use gp::{
    enumerate_depth1, gp_search, pipeline_fitness, step_benchmark, write_fitness_csv,
    GenerationRecord, GpConfig,
    GpResult, NodeKind,
};
pub use tree::{
    feature_union, fig5_pipeline, stacking_augment, stacking_transform, EstimatorSpec,
    FeatureNode, FitObserver, PipelineRegressor, PipelineTree, MAX_PIPELINE_DEPTH,
};
