//! Gaussian-process Bayesian optimization over mixed configuration spaces
//! with an EI/LCB/PI hedging portfolio.

mod acquisition;
mod gp;
mod hedge;
mod optimize;
mod space;

pub use acquisition::{
    acquisition_score, expected_improvement, lower_confidence_bound, normal_cdf, normal_pdf,
    probability_of_improvement, Acquisition, KAPPA,
};
pub use gp::{GaussianProcess, KernelParams};
pub use hedge::HedgeState;
pub use optimize::{hedge_step, optimize, HedgeProposal, Observation, OptimizeOptions, OptimizeResult, Source};
pub use space::{Config, ConfigurationSpace, Dimension, Value};
