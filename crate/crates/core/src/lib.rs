//! Rough Bergomi model library: exact joint Gaussian path simulation,
//! small-noise rescaling, discretized large-deviations rate functions, and
//! a Monte Carlo verification harness.

pub mod covariance;
pub mod error;
pub mod grid;
pub mod io;
pub mod operators;
pub mod opt;
pub mod path_sim;
pub mod rate_solver;
pub mod rbergomi;
pub mod special;
pub mod stats;
pub mod verify;

pub use covariance::ModelParams;
pub use error::{Error, Result};
pub use grid::Grid;
pub use operators::Control;
pub use path_sim::PathBundle;
pub use rate_solver::{Mode, RateProblem, RateResult};
