//! Surrogate-driven multiverse analysis.
//!
//! A [`space::SearchSpace`] declares the decisions under study. The
//! exploration loop in [`design`] fits a Gaussian-process
//! [`surrogate::SurrogateModel`] to evaluated configurations and acquires new
//! batches by integrated variance reduction (or UCB for comparison).
//! [`analysis`] turns the fitted surrogate into Bayes-factor interaction
//! tests, Sobol sensitivity indices, coregional correlations and prediction
//! grids.

pub mod analysis;
pub mod design;
pub mod error;
pub mod exec;
pub mod explore;
pub mod harness;
pub mod kernels;
pub mod optimize;
pub mod rng;
pub mod sobol;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
pub use exec::Execution;
