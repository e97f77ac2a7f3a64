use crate::error::{Error, Result};

/// Default step for the classical Runge–Kutta solver, in years.
pub const DEFAULT_ODE_STEP: f64 = 0.01;

/// Nodes and states produced by [`solve_ode`]. States are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

/// Classical fourth-order Runge–Kutta from `t_start` to `t_end`.
///
/// The interval is split into `ceil(|t_end - t_start| / step)` equal steps, so
/// the final node lands exactly on `t_end`. Integrating backward
/// (`t_end < t_start`) simply uses negative steps.
///
/// `rhs(t, y, dy)` writes the derivative into `dy`.
pub fn solve_ode<F>(rhs: F, t_start: f64, t_end: f64, y_start: &[f64], step: f64) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::domain(format!("ODE step must be positive, got {step}")));
    }
    let span = (t_end - t_start).abs();
    let n = if span == 0.0 {
        0
    } else {
        ((span / step) - 1e-9).ceil().max(1.0) as usize
    };
    solve_ode_steps(rhs, t_start, t_end, y_start, n)
}

/// Same as [`solve_ode`] with an explicit number of equal steps.
pub fn solve_ode_steps<F>(
    rhs: F,
    t_start: f64,
    t_end: f64,
    y_start: &[f64],
    n_steps: usize,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y_start.len();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity((n_steps + 1) * dim);
    times.push(t_start);
    states.extend_from_slice(y_start);
    if n_steps == 0 {
        return Ok(Trajectory { dim, times, states });
    }

    let h = (t_end - t_start) / n_steps as f64;
    let mut y = y_start.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    for i in 0..n_steps {
        let t = t_start + i as f64 * h;
        rhs(t, &y, &mut k1);
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..dim {
            tmp[j] = y[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4);
        for j in 0..dim {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }

        let t_next = if i + 1 == n_steps { t_end } else { t + h };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                context: "solve_ode".into(),
                message: format!("non-finite state at t = {t_next}"),
                last_estimate: None,
            });
        }
        times.push(t_next);
        states.extend_from_slice(&y);
    }
    Ok(Trajectory { dim, times, states })
}
