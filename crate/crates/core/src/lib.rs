//! Automated dynamic ensemble selection for tabular classification.
//!
//! A run searches a feature pipeline, tunes a pool of classifiers, then
//! searches ensemble strategies (static, stacked, dynamic classifier and
//! dynamic ensemble selection) with Gaussian-process Bayesian optimization.
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar type.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesopt;
pub mod calibration;
pub mod classifiers;
pub mod dataio;
pub mod ensemble;
pub mod error;
pub mod feateng;
pub mod linalg;
pub mod metrics;
pub mod orchestrator;
pub mod scalar;

pub use error::{Error, Result};
pub use orchestrator::{run_autodess, BudgetPlan, RunOptions, RunReport};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = dataio::Dataset<f64>;
pub type Split = dataio::Split<f64>;
pub type FittedClassifier = classifiers::FittedClassifier<f64>;
pub type PoolMember = calibration::PoolMember<f64>;
pub type CompetenceSet = ensemble::CompetenceSet<f64>;
pub type EnsembleModel = ensemble::EnsembleModel<f64>;
pub type FittedFeaturePipeline = feateng::FittedFeaturePipeline<f64>;
pub type GaussianProcess = bayesopt::GaussianProcess<f64>;
pub type AutodessModel = orchestrator::AutodessModel<f64>;
pub type RunOutcome = orchestrator::RunOutcome<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type Dataset32 = dataio::Dataset<f32>;
pub type Split32 = dataio::Split<f32>;
pub type FittedClassifier32 = classifiers::FittedClassifier<f32>;
pub type PoolMember32 = calibration::PoolMember<f32>;
pub type CompetenceSet32 = ensemble::CompetenceSet<f32>;
pub type EnsembleModel32 = ensemble::EnsembleModel<f32>;
pub type FittedFeaturePipeline32 = feateng::FittedFeaturePipeline<f32>;
pub type GaussianProcess32 = bayesopt::GaussianProcess<f32>;
pub type AutodessModel32 = orchestrator::AutodessModel<f32>;
pub type RunOutcome32 = orchestrator::RunOutcome<f32>;
