//! Cached coefficient lattice in remaining time.
//!
//! The loadings `C(ρ)` and the row `P(ρ)` of the survival-weighted propagator
//! do not depend on the evaluation time, and the drift splits as
//! `a_i(s - ρ) = α_i + γ_i e^{κ_i s} e^{-κ_i ρ}`. Integrating a handful of
//! running integrals once therefore yields `C0(t, t + ρ)` and
//! `Ẽ_t[λ_j(t + ρ)]` for every `t` by a few multiplications.

use super::{adjusted_reversion, covariance, mat_vec, quadratic, riccati_rhs};
use crate::error::{Error, Result};
use crate::mortality::{AffineForm, Dynamics, MortalityModel};
use crate::numerics::solve_ode_steps;

/// Spacing of the lattice nodes in years.
pub const DEFAULT_LATTICE_STEP: f64 = 0.05;

/// Runge–Kutta substeps per lattice interval.
const SUBSTEPS: usize = 2;

// State layout of the lattice ODE.
const C: usize = 0;
const P: usize = 2;
const IC: usize = 4;
const JC: usize = 6;
const KQ: usize = 8;
const IP: usize = 9;
const JP: usize = 11;
const LQ: usize = 13;
const STATE: usize = 14;

/// Integrated quantities at one remaining time `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeNode {
    /// Survival loadings `C(ρ)`.
    pub c: [f64; 2],
    /// Row of the survival-weighted propagator for the members' hazard.
    pub p: [f64; 2],
    ic: [f64; 2],
    jc: [f64; 2],
    kq: f64,
    ip: [f64; 2],
    jp: [f64; 2],
    lq: f64,
}

#[derive(Debug, Clone)]
pub struct AffineLattice {
    form: AffineForm,
    step: f64,
    nodes: Vec<LatticeNode>,
}

impl AffineLattice {
    /// Lattice on `ρ ∈ [0, extent]` (rounded up to a whole step).
    pub fn new(model: &MortalityModel, extent: f64, step: f64) -> Result<Self> {
        model.validate()?;
        Self::from_form(model.affine_form(), extent, step)
    }

    pub(crate) fn from_form(form: AffineForm, extent: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(extent >= 0.0) || !extent.is_finite() {
            return Err(Error::domain(format!(
                "invalid lattice extent {extent} or step {step}"
            )));
        }
        let n_nodes = (extent / step - 1e-9).ceil().max(0.0) as usize;
        let q = covariance(&form);
        let ou = form.kind == Dynamics::Ou;
        let mut y0 = [0.0; STATE];
        y0[P + form.members] = 1.0;

        let traj = solve_ode_steps(
            |rho, y, dy| {
                let c = [y[C], y[C + 1]];
                let p = [y[P], y[P + 1]];
                let mut dc = [0.0; 2];
                riccati_rhs(&form, &c, &mut dc);
                let m = adjusted_reversion(&form, &c);
                let qc = mat_vec(&q, &c);
                for i in 0..2 {
                    let decay = (-form.drift_rate[i] * rho).exp();
                    dy[C + i] = dc[i];
                    dy[P + i] = -(p[0] * m[0][i] + p[1] * m[1][i]);
                    dy[IC + i] = c[i];
                    dy[JC + i] = c[i] * decay;
                    dy[IP + i] = p[i];
                    dy[JP + i] = p[i] * decay;
                }
                if ou {
                    dy[KQ] = 0.5 * quadratic(&q, &c);
                    dy[LQ] = p[0] * qc[0] + p[1] * qc[1];
                } else {
                    dy[KQ] = 0.0;
                    dy[LQ] = 0.0;
                }
            },
            0.0,
            n_nodes as f64 * step,
            &y0,
            n_nodes * SUBSTEPS,
        )
        .map_err(|e| e.in_context("coefficient lattice"))?;

        let nodes = (0..=n_nodes)
            .map(|k| {
                let y = traj.state(k * SUBSTEPS);
                LatticeNode {
                    c: [y[C], y[C + 1]],
                    p: [y[P], y[P + 1]],
                    ic: [y[IC], y[IC + 1]],
                    jc: [y[JC], y[JC + 1]],
                    kq: y[KQ],
                    ip: [y[IP], y[IP + 1]],
                    jp: [y[JP], y[JP + 1]],
                    lq: y[LQ],
                }
            })
            .collect();
        Ok(Self { form, step, nodes })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest remaining time covered.
    pub fn extent(&self) -> f64 {
        (self.nodes.len() - 1) as f64 * self.step
    }

    pub fn node(&self, k: usize) -> &LatticeNode {
        &self.nodes[k]
    }

    /// Drift growth factors `e^{κ_i u}` used by [`AffineLattice::evaluate`].
    pub fn growth(&self, u: f64) -> [f64; 2] {
        [
            (self.form.drift_rate[0] * u).exp(),
            (self.form.drift_rate[1] * u).exp(),
        ]
    }

    /// `(C0(t, s), Ẽ_t[λ_j(s)])` for `s = t + kδ`, given `growth_s = growth(s)`.
    pub fn evaluate(&self, k: usize, growth_s: [f64; 2], lambda: [f64; 2]) -> (f64, f64) {
        let n = &self.nodes[k];
        let f = &self.form;
        let mut c0 = n.kq;
        let mut level = -n.lq;
        for i in 0..f.dim {
            let g = f.drift_exp[i] * growth_s[i];
            c0 -= f.drift_const[i] * n.ic[i] + g * n.jc[i];
            level += f.drift_const[i] * n.ip[i] + g * n.jp[i];
        }
        let mean = n.p[0] * lambda[0] + n.p[1] * lambda[1] + level;
        (c0, mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{coeffs, tilde_mean};
    use crate::mortality::{GompertzMakehamParams, SinglePopModel, TwoPopModel};
    use crate::numerics::Tolerance;

    fn models() -> Vec<MortalityModel> {
        let gm1 = GompertzMakehamParams::new(0.0009944, 11.4, 86.4515)
            .unwrap()
            .with_start_age(65.0)
            .unwrap();
        let gm2 = GompertzMakehamParams::new(0.0009944, 12.9374, 89.18)
            .unwrap()
            .with_start_age(65.0)
            .unwrap();
        let mut out = Vec::new();
        for kind in [Dynamics::Ou, Dynamics::Cir] {
            out.push(SinglePopModel::new(kind, gm1, 0.561, 0.0035).unwrap().into());
            out.push(
                TwoPopModel {
                    kind,
                    gm1,
                    gm2,
                    b1: 0.561,
                    b21: 0.0028,
                    b22: 0.65,
                    sigma1: 0.0035,
                    sigma21: 0.004,
                    sigma22: 0.005,
                }
                .into(),
            );
        }
        out
    }

    #[test]
    fn matches_pointwise_coefficients() {
        let tol = Tolerance::default();
        for model in models() {
            let lattice = AffineLattice::new(&model, 40.0, DEFAULT_LATTICE_STEP).unwrap();
            let lambda = [0.012, 0.011];
            for (t, k) in [(0.0, 100usize), (3.5, 300), (12.0, 700)] {
                let s = t + k as f64 * lattice.step();
                let (c0, mean) = lattice.evaluate(k, lattice.growth(s), lambda);
                let (p0, pc) = coeffs(&model, t, s, &tol).unwrap().parts();
                let node = lattice.node(k);
                assert!((node.c[0] - pc[0]).abs() < 1e-8, "{model:?}");
                assert!((node.c[1] - pc[1]).abs() < 1e-8, "{model:?}");
                assert!((c0 - p0).abs() < 1e-7 * p0.abs().max(1.0), "{model:?} {c0} {p0}");
                let e = tilde_mean(&model, t, s, lambda, &tol).unwrap();
                let j = model.members();
                assert!((mean - e[j]).abs() < 1e-8 * e[j].abs().max(1e-3), "{model:?} {mean} {}", e[j]);
            }
        }
    }

    #[test]
    fn origin_node() {
        let lattice = AffineLattice::new(&models()[0], 1.0, 0.05).unwrap();
        assert_eq!(lattice.len(), 21);
        let (c0, mean) = lattice.evaluate(0, lattice.growth(5.0), [0.02, 0.0]);
        assert_eq!(c0, 0.0);
        assert_eq!(mean, 0.02);
        assert!(AffineLattice::new(&models()[0], 1.0, 0.0).is_err());
    }
}
