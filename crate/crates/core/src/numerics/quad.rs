use crate::error::{Error, Result};

/// Convergence controls for the halving Simpson rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub max_refinements: u32,
}

impl Tolerance {
    pub fn new(rel_tol: f64, max_refinements: u32) -> Result<Self> {
        if !(rel_tol > 0.0) || !rel_tol.is_finite() {
            return Err(Error::config(format!("rel_tol must be positive, got {rel_tol}")));
        }
        if max_refinements < 1 {
            return Err(Error::config("max_refinements must be at least 1"));
        }
        Ok(Self {
            rel_tol,
            max_refinements,
        })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_refinements: 20,
        }
    }
}

/// Composite Simpson rule on `[a, b]`, doubling the number of panels until two
/// successive estimates agree to `tol.rel_tol`.
///
/// Every refinement reuses the previous abscissae, so a level with `n` panels
/// costs `n` new evaluations of `f`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) {
        return Err(Error::domain(format!(
            "integration bounds out of order: a = {a}, b = {b}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return Err(non_finite(a, b, None));
    }

    // Simpson with n panels: h/3 * (ends + 4 * odd + 2 * even).
    let mut n: u64 = 2;
    let ends = fa + fb;
    let abs_ends = fa.abs() + fb.abs();
    let mut odd = fm;
    let mut abs_odd = fm.abs();
    let mut even = 0.0;
    let mut abs_even = 0.0;
    let mut h = (b - a) / n as f64;
    let mut estimate = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);

    for _ in 0..tol.max_refinements {
        // The old odd nodes become even nodes of the refined rule.
        even += odd;
        abs_even += abs_odd;
        n *= 2;
        h *= 0.5;
        let mut new_odd = 0.0;
        let mut new_abs = 0.0;
        for k in 0..n / 2 {
            let x = a + (2 * k + 1) as f64 * h;
            let v = f(x);
            if !v.is_finite() {
                return Err(non_finite(a, b, Some(estimate)));
            }
            new_odd += v;
            new_abs += v.abs();
        }
        odd = new_odd;
        abs_odd = new_abs;

        let refined = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let scale = h / 3.0 * (abs_ends + 4.0 * abs_odd + 2.0 * abs_even);
        let diff = (refined - estimate).abs();
        estimate = refined;
        if diff <= tol.rel_tol * refined.abs() || diff <= 1e-15 * scale {
            return Ok(refined);
        }
    }
    Err(Error::Numerical {
        context: "integrate".into(),
        message: format!(
            "no convergence on [{a}, {b}] after {} refinements",
            tol.max_refinements
        ),
        last_estimate: Some(estimate),
    })
}

fn non_finite(a: f64, b: f64, last: Option<f64>) -> Error {
    Error::Numerical {
        context: "integrate".into(),
        message: format!("non-finite integrand on [{a}, {b}]"),
        last_estimate: last,
    }
}
