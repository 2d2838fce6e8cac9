//! Rare-event probability estimation for maps of Gaussian inputs.
//!
//! Given a forward model `f` and a nominal Gaussian (or Gaussian-mixture)
//! density on its inputs, this crate estimates `mu = P(f(x) in Y)` for an
//! interval `Y` whose probability is far too small for plain Monte Carlo.
//! The importance-sampling density is built by treating a point inside `Y`
//! as data in a fictitious Bayesian inverse problem: the Laplace
//! approximation of the resulting posterior concentrates exactly where the
//! nominal density meets the preimage of `Y`, and a one-dimensional
//! analysis of the linearized pushforward tunes the pseudo-data point and
//! its noise level by minimizing the divergence from the ideal zero-variance
//! density.

pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod inverse;
mod interval;
mod linalg;
pub mod models;
pub mod tuning;

pub use error::{Error, Result};
pub use interval::TargetInterval;
