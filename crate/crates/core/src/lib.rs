//! Grey-box identification of ultra-low temperature freezer heat dynamics.
//!
//! The library models a freezing chamber as a 3-state stochastic differential
//! equation — chamber temperature, envelope temperature, and a local
//! evaporator temperature whose relaxation rate is modulated by a sigmoid of
//! the accumulated compressor signal. Only the chamber temperature is
//! observed. Parameters are estimated by maximum likelihood through a
//! continuous-discrete extended Kalman filter.
//!
//! Module map:
//! - [`model`]: parameter vector, drift/Jacobian/input matrices, compressor
//!   signal transforms, and the dataset containers.
//! - [`simulate`]: closed-loop synthetic data generation (thermostat control,
//!   synthetic exogenous inputs, Euler-Maruyama integration).
//! - [`ekf`]: moment propagation, measurement updates, full filter passes,
//!   and unconditional prediction.
//! - [`estimate`]: negative log-likelihood minimization, Hessian-based
//!   uncertainty, Wald intervals, and partial retuning.
//! - [`profile`]: profile likelihood over parameter grids with
//!   chi-square-thresholded confidence regions.
//! - [`diagnostics`]: residual ACF, cumulated periodogram, and RMSE.
//! - [`io`]: dataset CSV and fit-report persistence.

pub mod diagnostics;
pub mod ekf;
mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod profile;
pub mod simulate;

pub(crate) mod par;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
