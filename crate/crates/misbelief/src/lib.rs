//! Long-run beliefs of dogmatically overconfident Bayesian learners in
//! linear-Gaussian environments.
//!
//! A learner watches signals `r = M f + ε` and updates by Bayes' rule, but
//! holds a degenerate prior that pins part of the parameter vector to a
//! wrong value. Its posterior then concentrates on the point of the prior's
//! support closest in KL divergence to the truth. This crate computes those
//! concentration points in closed form, cross-checks them with a numeric
//! KL-minimization oracle, instantiates the society/discrimination model
//! built on top of them, and verifies convergence by finite-sample
//! simulation.

pub mod error;
pub mod extensions;
pub mod gaussian;
pub mod limit;
pub mod linalg;
pub mod optimize;
pub mod rng;
pub mod simulate;
pub mod society;
pub mod verify;

pub use error::{Error, Result};
pub use gaussian::{kl_divergence, log_likelihood, sample_signals};
pub use gaussian::{Fundamentals, LinearGaussianModel, SignalBatch};
pub use limit::oracle::{numeric_oracle, OracleConfig};
pub use limit::{solve, solve_agnostic, solve_fixed_covariance, solve_pinned_fundamentals};
pub use limit::{DogmaticConstraint, LimitBelief};
