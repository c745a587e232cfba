//! Simulation and Bayesian inference for the generalised gamma-Pareto (GGP)
//! subordinator, its normal variance mixture (NGGP), and stochastic-volatility
//! models driven by them.

pub mod cli;
pub mod dists;
pub mod error;
pub mod evaluation;
pub mod ggp;
pub mod inference;
pub mod quadrature;
pub mod rng;
pub mod selftest;
pub mod sv;
pub mod special_fn;

pub use error::{Error, Result};
pub use rng::RngStream;
