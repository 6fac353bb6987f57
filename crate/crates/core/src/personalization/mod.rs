//! Two-stage personalization experiments.
//!
//! A fixed scoring rule generates training data, a model is fitted once, and
//! the fitted scores generate a test set whose mean realized value measures
//! the model. Two model families are provided: per-item ridge regression on
//! observed features ([`feature`]) and biased matrix factorization fitted by
//! alternating least squares ([`lowrank`], [`als`]).

pub mod als;
pub mod feature;
pub mod lowrank;
pub mod ridge;
pub mod two_stage;

pub use als::{als_fit, AlsFit, AlsOptions, Rating};
pub use feature::{fit_feature_policy, FeatureModel, FeatureParams, FeaturePolicy, WeightScale};
pub use lowrank::{LowRankModel, LowRankParams};
pub use ridge::{ridge_fit, RidgeFit};
pub use two_stage::{run_two_stage, Experiment, LowRankConfig, Regime, RidgeConfig, TwoStageConfig, TwoStageResult};
