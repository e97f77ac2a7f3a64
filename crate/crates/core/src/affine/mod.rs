//! Exponential-affine survival expectations, longevity-bond volatility and
//! hazard means under the survival-weighted measure.
//!
//! Coefficients are written in remaining time `τ = s - t`. For the members'
//! hazard `j` they solve
//! `dC/dτ = e_j - Bᵀ C - ½ v(C)` and `dC0/dτ = -C·a(s - τ) + ½ Cᵀ Q C`,
//! where `v_k = (Σ_{·k}·C)²` appears for CIR only and the `Q = ΣΣᵀ` term for OU only.

mod lattice;

pub use lattice::{AffineLattice, LatticeNode, DEFAULT_LATTICE_STEP};

use crate::error::{Error, Result};
use crate::mortality::{drift_a, AffineForm, Dynamics, MortalityModel, SinglePopModel, TwoPopModel};
use crate::numerics::{integrate, solve_ode, Tolerance, DEFAULT_ODE_STEP};

/// `E_t[exp(-∫_t^s λ)] = exp(a0 - a1 λ(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoeffs1 {
    pub a0: f64,
    pub a1: f64,
}

/// `E_t[exp(-∫_t^s λ_2)] = exp(c0 - c1 λ_1(t) - c2 λ_2(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoeffs2 {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AffineCoeffs {
    Single(AffineCoeffs1),
    TwoPop(AffineCoeffs2),
}

impl AffineCoeffs {
    /// `(C0, [C1, C2])` with a zero second loading for one factor.
    pub fn parts(&self) -> (f64, [f64; 2]) {
        match self {
            AffineCoeffs::Single(c) => (c.a0, [c.a1, 0.0]),
            AffineCoeffs::TwoPop(c) => (c.c0, [c.c1, c.c2]),
        }
    }
}

/// Market inputs: short rate, stock and longevity prices of risk, bond maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub r: f64,
    pub theta_s: f64,
    pub sigma_s: f64,
    pub theta1: f64,
    pub bond_maturity: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s > 0.0) {
            return Err(Error::config(format!("sigma_s must be positive, got {}", self.sigma_s)));
        }
        if !(self.bond_maturity > 0.0) {
            return Err(Error::config(format!(
                "bond_maturity must be positive, got {}",
                self.bond_maturity
            )));
        }
        for (name, v) in [("r", self.r), ("theta_s", self.theta_s), ("theta1", self.theta1)] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Excess return per unit of wealth held in the stock.
    pub fn stock_premium(&self) -> f64 {
        self.sigma_s * self.theta_s
    }
}

fn check_order(t: f64, s: f64) -> Result<()> {
    if !(t <= s) {
        return Err(Error::domain(format!("expected t <= s, got t = {t}, s = {s}")));
    }
    Ok(())
}

/// OU loading `(1 - e^{-bτ}) / b`.
fn ou_loading(b: f64, tau: f64) -> f64 {
    -(-b * tau).exp_m1() / b
}

/// CIR loading `2(e^{ητ} - 1) / ((b + η)(e^{ητ} - 1) + 2η)` with `η = sqrt(b² + 2σ²)`.
fn cir_loading(b: f64, sigma: f64, tau: f64) -> f64 {
    let eta = (b * b + 2.0 * sigma * sigma).sqrt();
    let g = (eta * tau).exp_m1();
    2.0 * g / ((b + eta) * g + 2.0 * eta)
}

/// `A1` for a one-factor model with remaining time `tau`.
pub(crate) fn single_loading(kind: Dynamics, b: f64, sigma: f64, tau: f64) -> f64 {
    match kind {
        Dynamics::Ou => ou_loading(b, tau),
        Dynamics::Cir => cir_loading(b, sigma, tau),
    }
}

/// Two-population OU `C1` in remaining time; solves `dC1/dτ = -b1 C1 - b21 C2`, `C1(0) = 0`.
fn ou_cross_loading(m: &TwoPopModel, tau: f64) -> f64 {
    let (b1, b22, b21) = (m.b1, m.b22, m.b21);
    let e1 = -(-b1 * tau).exp_m1();
    let e2 = -(-b22 * tau).exp_m1();
    b21 / (b1 * (b1 - b22)) * e1 - b21 / (b22 * (b1 - b22)) * e2
}

/// Survival coefficients `(A0, A1)` of a one-factor model on `[t, s]`.
pub fn coeffs_single(model: &SinglePopModel, t: f64, s: f64, tol: &Tolerance) -> Result<AffineCoeffs1> {
    check_order(t, s)?;
    model.validate()?;
    let (b, sigma) = (model.b, model.sigma);
    let a1 = single_loading(model.kind, b, sigma, s - t);
    let integral = match model.kind {
        Dynamics::Ou => integrate(
            |u| {
                let l = ou_loading(b, s - u);
                drift_a(u, &model.gm, b) * l - 0.5 * sigma * sigma * l * l
            },
            t,
            s,
            tol,
        ),
        Dynamics::Cir => integrate(|u| drift_a(u, &model.gm, b) * cir_loading(b, sigma, s - u), t, s, tol),
    }
    .map_err(|e| e.in_context("coeffs_single"))?;
    Ok(AffineCoeffs1 { a0: -integral, a1 })
}

/// Survival coefficients `(C0, C1, C2)` of the members' population 2 on `[t, s]`.
///
/// OU uses closed forms for the loadings and quadrature for `C0`; CIR integrates
/// the Riccati system backward in `t` from the zero terminal condition at `s`.
pub fn coeffs_two_pop(model: &TwoPopModel, t: f64, s: f64, tol: &Tolerance) -> Result<AffineCoeffs2> {
    check_order(t, s)?;
    model.validate()?;
    match model.kind {
        Dynamics::Ou => {
            let c2 = ou_loading(model.b22, s - t);
            let c1 = ou_cross_loading(model, s - t);
            let q = covariance(&MortalityModel::TwoPop(*model).affine_form());
            let c0 = integrate(
                |u| {
                    let c = [ou_cross_loading(model, s - u), ou_loading(model.b22, s - u)];
                    -drift_a(u, &model.gm1, model.b1) * c[0] - drift_a(u, &model.gm2, model.b22) * c[1]
                        + 0.5 * quadratic(&q, &c)
                },
                t,
                s,
                tol,
            )
            .map_err(|e| e.in_context("coeffs_two_pop"))?;
            Ok(AffineCoeffs2 { c0, c1, c2 })
        }
        Dynamics::Cir => {
            let form = MortalityModel::TwoPop(*model).affine_form();
            let traj = solve_ode(
                |u, y, dy| {
                    let c = [y[1], y[2]];
                    let mut dc = [0.0; 2];
                    riccati_rhs(&form, &c, &mut dc);
                    // d/dt = -d/dτ.
                    dy[0] = form.drift(0, u) * c[0] + form.drift(1, u) * c[1];
                    dy[1] = -dc[0];
                    dy[2] = -dc[1];
                },
                s,
                t,
                &[0.0, 0.0, 0.0],
                DEFAULT_ODE_STEP,
            )
            .map_err(|e| e.in_context("coeffs_two_pop"))?;
            let y = traj.last_state();
            Ok(AffineCoeffs2 {
                c0: y[0],
                c1: y[1],
                c2: y[2],
            })
        }
    }
}

/// Dispatches to [`coeffs_single`] or [`coeffs_two_pop`].
pub fn coeffs(model: &MortalityModel, t: f64, s: f64, tol: &Tolerance) -> Result<AffineCoeffs> {
    match model {
        MortalityModel::Single(m) => coeffs_single(m, t, s, tol).map(AffineCoeffs::Single),
        MortalityModel::TwoPop(m) => coeffs_two_pop(m, t, s, tol).map(AffineCoeffs::TwoPop),
    }
}

/// `exp(C0 - C·λ)`; only the first component of `lambda` is read for one factor.
pub fn survival_expectation(coeffs: &AffineCoeffs, lambda: &[f64]) -> f64 {
    match coeffs {
        AffineCoeffs::Single(c) => (c.a0 - c.a1 * lambda[0]).exp(),
        AffineCoeffs::TwoPop(c) => (c.c0 - c.c1 * lambda[0] - c.c2 * lambda[1]).exp(),
    }
}

/// Volatility loading of the rolling longevity bond on `W_1`:
/// `-A1(t, t + T_L) σ_1`, times `sqrt(λ_1)` for CIR.
pub fn rolling_bond_volatility(model: &MortalityModel, market: &MarketParams, t: f64, lambda1: f64) -> Result<f64> {
    market.validate()?;
    let reference = model.reference();
    let _ = t; // the loading depends on remaining time only
    let a1 = single_loading(reference.kind, reference.b, reference.sigma, market.bond_maturity);
    match reference.kind {
        Dynamics::Ou => Ok(-a1 * reference.sigma),
        Dynamics::Cir => {
            if lambda1 < 0.0 {
                return Err(Error::domain(format!(
                    "CIR bond volatility needs a non-negative hazard, got {lambda1}"
                )));
            }
            Ok(-a1 * reference.sigma * lambda1.sqrt())
        }
    }
}

/// Cash and rolling-bond weights that replicate the return of the bond maturing at `s`.
pub fn replication_weights(model: &MortalityModel, market: &MarketParams, t: f64, s: f64) -> Result<(f64, f64)> {
    check_order(t, s)?;
    market.validate()?;
    let reference = model.reference();
    if reference.sigma == 0.0 {
        return Err(Error::domain("rolling bond has zero volatility; replication undefined"));
    }
    // The σ_1 and sqrt(λ_1) factors cancel in the volatility ratio.
    let dated = single_loading(reference.kind, reference.b, reference.sigma, s - t);
    let rolling = single_loading(reference.kind, reference.b, reference.sigma, market.bond_maturity);
    let w_bond = dated / rolling;
    Ok((1.0 - w_bond, w_bond))
}

/// Hazard means at `s` under the measure weighted by the members' survival on `[t, s]`.
///
/// Returns `[Ẽ λ_1(s), Ẽ λ_2(s)]`; the second slot is zero for one factor.
pub fn tilde_mean(model: &MortalityModel, t: f64, s: f64, lambda: [f64; 2], tol: &Tolerance) -> Result<[f64; 2]> {
    check_order(t, s)?;
    model.validate()?;
    let tau = s - t;
    let ctx = |e: Error| e.in_context("tilde_mean");
    match (model, model.kind()) {
        (MortalityModel::Single(m), Dynamics::Ou) => {
            let b = m.b;
            let sig2 = m.sigma * m.sigma;
            let shift = integrate(
                |u| (drift_a(u, &m.gm, b) - sig2 * ou_loading(b, s - u)) * (-b * (s - u)).exp(),
                t,
                s,
                tol,
            )
            .map_err(ctx)?;
            Ok([lambda[0] * (-b * tau).exp() + shift, 0.0])
        }
        (MortalityModel::TwoPop(m), Dynamics::Ou) => {
            let form = model.affine_form();
            let q = covariance(&form);
            // V(ρ) = exp(-Bρ) for lower-triangular B.
            let v = |rho: f64| {
                let e1 = (-m.b1 * rho).exp();
                let e2 = (-m.b22 * rho).exp();
                [[e1, 0.0], [-m.b21 * (e1 - e2) / (m.b22 - m.b1), e2]]
            };
            let f = |rho: f64| {
                let c = [ou_cross_loading(m, rho), ou_loading(m.b22, rho)];
                let qc = mat_vec(&q, &c);
                [form.drift(0, s - rho) - qc[0], form.drift(1, s - rho) - qc[1]]
            };
            let shift0 = integrate(|rho| v(rho)[0][0] * f(rho)[0], 0.0, tau, tol).map_err(ctx)?;
            let shift1 = integrate(
                |rho| {
                    let (vr, fr) = (v(rho), f(rho));
                    vr[1][0] * fr[0] + vr[1][1] * fr[1]
                },
                0.0,
                tau,
                tol,
            )
            .map_err(ctx)?;
            let vt = v(tau);
            Ok([
                vt[0][0] * lambda[0] + shift0,
                vt[1][0] * lambda[0] + vt[1][1] * lambda[1] + shift1,
            ])
        }
        (_, Dynamics::Cir) => cir_tilde_mean(&model.affine_form(), s, tau, lambda).map_err(ctx),
    }
}

/// Forward integration in `ρ = s - u` of the loadings `C`, the propagator `V`
/// (`dV/dρ = -V (B + D(C))`, `D_ik = Σ_ik (Σ_{·k}·C)`) and `∫ V a(s - ρ) dρ`.
fn cir_tilde_mean(form: &AffineForm, s: f64, tau: f64, lambda: [f64; 2]) -> Result<[f64; 2]> {
    let n = form.dim;
    // State: C[0..n], V row-major [n..n+n²], drift integral [n+n²..n+n²+n].
    let size = n + n * n + n;
    let mut y0 = vec![0.0; size];
    for i in 0..n {
        y0[n + i * n + i] = 1.0;
    }
    let traj = solve_ode(
        |rho, y, dy| {
            let c = [y[0], if n > 1 { y[1] } else { 0.0 }];
            let mut dc = [0.0; 2];
            riccati_rhs(form, &c, &mut dc);
            dy[..n].copy_from_slice(&dc[..n]);
            let m = adjusted_reversion(form, &c);
            for i in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += y[n + i * n + l] * m[l][k];
                    }
                    dy[n + i * n + k] = -acc;
                }
                let mut acc = 0.0;
                for l in 0..n {
                    acc += y[n + i * n + l] * form.drift(l, s - rho);
                }
                dy[n + n * n + i] = acc;
            }
        },
        0.0,
        tau,
        &y0,
        DEFAULT_ODE_STEP,
    )?;
    let y = traj.last_state();
    let mut out = [0.0; 2];
    for i in 0..n {
        let mut acc = y[n + n * n + i];
        for l in 0..n {
            acc += y[n + i * n + l] * lambda[l];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// `Q = Σ Σᵀ`.
pub(crate) fn covariance(form: &AffineForm) -> [[f64; 2]; 2] {
    let l = &form.loading;
    let mut q = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            q[i][k] = l[i][0] * l[k][0] + l[i][1] * l[k][1];
        }
    }
    q
}

pub(crate) fn mat_vec(m: &[[f64; 2]; 2], v: &[f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub(crate) fn quadratic(m: &[[f64; 2]; 2], v: &[f64; 2]) -> f64 {
    let mv = mat_vec(m, v);
    v[0] * mv[0] + v[1] * mv[1]
}

/// Exposure of `log` survival to each Brownian motion, per unit `sqrt(λ_k)` for CIR.
pub(crate) fn shock_exposure(form: &AffineForm, c: &[f64; 2]) -> [f64; 2] {
    let l = &form.loading;
    [l[0][0] * c[0] + l[1][0] * c[1], l[0][1] * c[0] + l[1][1] * c[1]]
}

/// `dC/dτ = e_j - Bᵀ C - ½ v(C)` with `v` present for CIR only.
pub(crate) fn riccati_rhs(form: &AffineForm, c: &[f64; 2], dc: &mut [f64; 2]) {
    let b = &form.mean_reversion;
    let exposure = shock_exposure(form, c);
    for i in 0..form.dim {
        let mut v = if i == form.members { 1.0 } else { 0.0 };
        for k in 0..form.dim {
            v -= b[k][i] * c[k];
        }
        if form.kind == Dynamics::Cir {
            v -= 0.5 * exposure[i] * exposure[i];
        }
        dc[i] = v;
    }
}

/// Mean-reversion matrix of the hazards under the survival-weighted measure.
/// For CIR the drift gains `-Σ_ik (Σ_{·k}·C) λ_k`; OU keeps `B` and shifts the level instead.
pub(crate) fn adjusted_reversion(form: &AffineForm, c: &[f64; 2]) -> [[f64; 2]; 2] {
    let mut m = form.mean_reversion;
    if form.kind == Dynamics::Cir {
        let exposure = shock_exposure(form, c);
        for (i, row) in m.iter_mut().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                *entry += form.loading[i][k] * exposure[k];
            }
        }
    }
    m
}
