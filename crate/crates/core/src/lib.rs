//! Multi-objective reward modeling on diversified preference data.
//!
//! Bradley-Terry reward models are trained on preference pairs drawn from K
//! sources. The MORE scheme weights the per-source losses by the min-norm
//! point of their reward-head gradients, which damps source-specific reward
//! drift and the over-confident reward differences it causes. The crate also
//! ships the evaluation side: accuracy, ECE, reward-difference statistics and
//! best-of-S reject sampling against known ground truth.
//!
//! Modules, bottom up:
//! - [`prefdata`]: synthetic and JSONL preference data, balancing, batching
//! - [`rewardnet`]: linear and one-hidden-layer reward models, loss, gradients
//! - [`moosolver`]: min-norm simplex weights (Frank-Wolfe)
//! - [`trainer`]: Single / MultiTask / MORE training, averaging ensemble
//! - [`metrics`]: accuracy, ECE, Tukey outliers, drift error, Spearman
//! - [`alignment`]: reject sampling and the ECE ↔ alignment study
//! - [`experiment`]: TOML config, digests, seeded sweeps

pub mod alignment;
pub mod error;
pub mod experiment;
pub mod math;
pub mod metrics;
pub mod moosolver;
pub mod par;
pub mod prefdata;
pub mod rewardnet;
pub mod trainer;

pub use error::{Error, Result};
pub use experiment::ExperimentConfig;
pub use moosolver::{min_norm_pair, min_norm_weights, GradientSet, SimplexWeights, SolverOptions};
pub use par::Execution;
pub use prefdata::{DiversifiedDataset, FeatureVector, PreferencePair, SynthesisSpec};
pub use rewardnet::{Arch, GradScope, Gradient, RewardModel, Scorer};
pub use trainer::{train, Scheme, TrainConfig, TrainedRM};
