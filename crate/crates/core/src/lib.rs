//! Simulation and statistical verification of non-homogeneous Poisson and
//! generalized counting processes, their time-changed (fractional, tempered,
//! mixed and space-fractional) variants, and Skellam-type differences.

pub mod error;
pub mod rates;
pub mod sampling;
pub mod scenario;
pub mod processes;
pub mod subordinators;
pub mod verify;

pub use error::{Error, Result};
