//! The learned restart ranker.
//!
//! A [`RankerModel`] scores a solution of an instance; two solutions of the
//! same instance are compared through [`pair_probability`] on their scores
//! (the Siamese twins share one parameter store). Training minimises the
//! pairwise cross-entropy with Adam. A regression variant of the same
//! network predicts final distances directly and serves as a baseline.

mod config;
mod features;
mod linalg;
mod metrics;
mod network;
mod regression;
mod store;
mod train;

pub use config::{ConfigError, ScorerConfig};
pub use features::{
    featurize, route_length_stats, NodeFeatureVector, SolutionFeatureVector, SolutionFeatures,
    DEMAND_SCALE, NODE_FEATURES, SOLUTION_FEATURES,
};
pub use metrics::{accuracy, auc, evaluate, pair_probabilities, Evaluation};
pub use network::{pair_probability, pairwise_loss, Gradients, ModelError, RankerModel, Tensor};
pub use regression::{evaluate_regression, train_regression, RegressionSample};
pub use store::{load_model, save_model, ModelFile, ModelKind, StoreError, MODEL_FORMAT, MODEL_VERSION};
pub use train::{featurize_pairs, train, train_model, Adam, PairSample, TrainError, TrainOutcome};

use crate::cvrp::{Instance, Solution};
use serde::Serialize;

/// Two initial solutions of one instance, their final distances after
/// local search, and the label (1 iff `a` ended strictly better).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabeledPair {
    pub instance: Instance,
    pub a: Solution,
    pub b: Solution,
    pub final_a: f64,
    pub final_b: f64,
    pub label: u8,
}

/// Orders `candidates` by descending score; equal scores keep input order.
pub fn rank(model: &RankerModel, instance: &Instance, candidates: &[Solution]) -> Vec<usize> {
    let matrix = instance.distance_matrix();
    let feats: Vec<SolutionFeatures> =
        candidates.iter().map(|c| featurize(instance, &matrix, c)).collect();
    let refs: Vec<&SolutionFeatures> = feats.iter().collect();
    let scores = model.score_batch(&refs);
    rank_by_scores(&scores)
}

/// Stable argsort of `scores`, highest first.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}
