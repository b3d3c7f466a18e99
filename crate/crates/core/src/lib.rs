//! Tabular policy-gradient testbed for probability prediction.
//!
//! A "model" answers questions from a handful of categories by emitting a
//! probability token, and is rewarded with a proper scoring rule against a
//! Bernoulli outcome. The crate trains such models with PPO, RLOO, GRPO and
//! mean-centred GRPO, measures their calibration, and analyses the expected
//! advantages that the group-normalised estimators assign to each token.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

// `!(x >= 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod bias;
pub mod env;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod trainer;
pub mod util;

pub use advantage::{
    adv_grpo, adv_grpo_nostd, adv_ppo, adv_rloo, expected_nostd_advantage, nostd_scale,
    reward_moments, true_advantage, EstimatorKind, EstimatorSpec, RewardMoments, DEFAULT_GRPO_EPS,
};
pub use bias::{
    approx_grpo_advantage, discretize_beta, discretize_beta_on, empirical_advantage_curve,
    exact_advantage_curve, sigma_estimates,
};
pub use env::{gen_categories, gen_dataset, reward, Dataset, RewardRule, Sample, Split};
pub use error::{Error, Result};
pub use metrics::{accuracy, auroc, ece, reliability};
pub use policy::{ProbVocab, Readout};
pub use scalar::Scalar;
pub use trainer::{evaluate, run};

/// Default world shape: 20 categories, 10,000 questions per split.
pub const DEFAULT_CATEGORIES: usize = 20;
pub const DEFAULT_DATASET_SIZE: usize = 10_000;

pub type CategoryTable = env::CategoryTable<f64>;
pub type World = env::World<f64>;
pub type Policy = policy::TabularPolicy<f64>;
pub type Vocab = policy::ProbVocab<f64>;
pub type Values = policy::ValueTable<f64>;
pub type Batch = policy::RolloutBatch<f64>;
pub type Checkpoint = policy::Checkpoint<f64>;
pub type Estimator = advantage::EstimatorSpec<f64>;
pub type TrainConfig = trainer::TrainConfig<f64>;
pub type TrainLog = trainer::TrainLog<f64>;
pub type TrainResult = trainer::TrainResult<f64>;
pub type Evaluation = trainer::Evaluation<f64>;
pub type ReliabilityBin = metrics::ReliabilityBin<f64>;
pub type FixedPolicy = bias::FixedPolicy<f64>;
pub type AdvantageCurve = bias::AdvantageCurve<f64>;
pub type SigmaPair = bias::SigmaPair<f64>;
