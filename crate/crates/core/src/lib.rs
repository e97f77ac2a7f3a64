//! Stochastic mortality, longevity-bond pricing coefficients and optimal
//! income-drawdown controls, with a Monte Carlo harness for scheme experiments.

pub mod affine;
pub mod control;
pub mod error;
pub mod experiments;
pub mod mortality;
pub mod numerics;
pub mod scheme;

pub use error::{Error, Result};
