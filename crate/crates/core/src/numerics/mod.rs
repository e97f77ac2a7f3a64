//! Quadrature, Runge–Kutta integration, time grids and reproducible Gaussian streams.

mod ode;
mod quad;
mod rng;

pub use ode::{solve_ode, solve_ode_steps, Trajectory, DEFAULT_ODE_STEP};
pub use quad::{integrate, Tolerance};
pub use rng::{gaussian_stream, GaussianStream};

use crate::error::{Error, Result};

/// Uniform grid `t0, t0 + step, ..., t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    step: f64,
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Builds the grid; `t1 - t0` must be an integer multiple of `step`.
    pub fn new(t0: f64, t1: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config(format!("grid step must be positive, got {step}")));
        }
        if !(t0 <= t1) {
            return Err(Error::config(format!("grid start {t0} exceeds end {t1}")));
        }
        let ratio = (t1 - t0) / step;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(format!(
                "grid span {} is not a multiple of step {step}",
                t1 - t0
            )));
        }
        let n = n as usize;
        let mut nodes: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * step).collect();
        if let Some(last) = nodes.last_mut() {
            *last = t1;
        }
        Ok(Self { t0, t1, step, nodes })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of steps, one less than the number of nodes.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index of the node closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.step).round().max(0.0) as usize;
        k.min(self.steps())
    }
}
