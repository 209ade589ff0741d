//! Default probabilities from obligor covariates, used as the mixing sample
//! of an exchangeable Bernoulli mixture for portfolio credit risk.
//!
//! Four classifiers (logistic regression, random forest, AdaBoost, k-nearest
//! neighbours) estimate each obligor's default probability. The calibrated
//! probabilities feed the [`mixture`] module. It computes cross moments,
//! default correlation, the non-parametric and beta-binomial distributions
//! of the number of defaults, their divergence and Value-at-Risk.
//!
//! [`pipeline`] chains every stage from a single [`pipeline::RunConfig`].

pub mod calibration;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod mixture;
pub mod pipeline;
mod serde_float;

pub use error::{Error, Result};
