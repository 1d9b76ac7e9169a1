//! Trimmed ℓ1 regularized M-estimation.
//!
//! The trimmed ℓ1 penalty `R(θ; h)` sums all but the `h` largest magnitudes of
//! `θ`, so the largest entries are estimated without shrinkage. This crate
//! provides
//!
//! - the penalty and its operators ([`penalty`]),
//! - least-squares and Gaussian graphical losses ([`losses`]),
//! - the block coordinate descent solver over parameters and trimming weights,
//!   with its stationarity measure and descent certificate ([`bcd`]),
//! - proximal-gradient baselines for ℓ1, SCAD, MCP and a difference-of-convex
//!   scheme for the trimmed penalty ([`baselines`]),
//! - seeded synthetic data ([`datagen`]) and the replicated experiments built
//!   on top of them ([`experiments`]).

pub mod baselines;
pub mod bcd;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod losses;
pub mod penalty;
pub mod problem;
pub mod rng;

pub use bcd::{solve_bcd, BcdConfig, BcdSolution, SolverStatus, SolverTrace, StepSize, WeightUpdate};
pub use error::{Result, TrimError};
pub use losses::{GaussianGraphicalLoss, LeastSquaresLoss, SmoothLoss};
pub use penalty::WeightVector;
pub use problem::TrimmedProblem;
