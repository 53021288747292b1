//! Generalized Riccati equations for affine processes on `R_+^m × R^n`:
//! transform exponents, conservativeness, Esscher tilts and exponential
//! martingale checks, with a Monte Carlo cross-check.

pub mod builtin;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod esscher;
pub mod levy;
pub mod model;
pub mod model_file;
pub mod montecarlo;
pub mod quad;
pub mod riccati;
pub mod special;

pub use error::{Error, Result};
