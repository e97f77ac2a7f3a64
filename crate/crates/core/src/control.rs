//! Annuity-like value `G`, its hazard gradient and the optimal drawdown policy.
//!
//! `G(t, λ) = E_t[∫_t^{t_max} (φ λ_j(s) + 1) e^{-∫_t^s (r + λ_j)} ds]`
//! factorises into the survival expectation and the hazard mean under the
//! survival-weighted measure:
//! `G = ∫ e^{-r(s-t)} e^{C0 - C·λ} (1 + φ Ẽ_t[λ_j(s)]) ds`.

use crate::affine::{single_loading, AffineLattice, MarketParams, DEFAULT_LATTICE_STEP};
use crate::error::{Error, Result};
use crate::mortality::MortalityModel;
use crate::numerics::{TimeGrid, Tolerance};

/// Scheme settings shared by the policy and the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeScenario {
    /// Weight of the manager's utility.
    pub phi: f64,
    /// Fraction of a deceased member's wealth paid as compensation.
    pub pi: f64,
    pub y0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Truncation of the infinite horizon in `G`.
    pub t_max: f64,
    pub tol: Tolerance,
}

impl SchemeScenario {
    /// Scenario with the default horizon, grid, path count, seed and truncation.
    pub fn with_defaults(phi: f64, y0: f64) -> Self {
        Self {
            phi,
            pi: 1.0,
            y0,
            horizon: 35.0,
            dt: 0.1,
            n_paths: 100,
            seed: 42,
            t_max: 120.0,
            tol: Tolerance::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi >= 0.0) || !self.phi.is_finite() {
            return Err(Error::config(format!("phi must be non-negative, got {}", self.phi)));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::config(format!("pi must lie in [0, 1], got {}", self.pi)));
        }
        if !(self.y0 > 0.0) || !self.y0.is_finite() {
            return Err(Error::config(format!("y0 must be positive, got {}", self.y0)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        if !(self.t_max > self.horizon) || !self.t_max.is_finite() {
            return Err(Error::config(format!(
                "t_max ({}) must exceed the horizon ({})",
                self.t_max, self.horizon
            )));
        }
        Tolerance::new(self.tol.rel_tol, self.tol.max_refinements)?;
        Ok(())
    }

    /// Simulation grid `0, dt, ..., horizon`.
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, self.horizon, self.dt)
    }
}

/// Withdrawal rate and portfolio fractions; the three weights sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyDecision {
    pub withdraw_rate: f64,
    pub stock_weight: f64,
    pub bond_weight: f64,
    pub cash_weight: f64,
}

impl PolicyDecision {
    fn new(withdraw_rate: f64, stock_weight: f64, bond_weight: f64) -> Self {
        Self {
            withdraw_rate,
            stock_weight,
            bond_weight,
            cash_weight: 1.0 - (stock_weight + bond_weight),
        }
    }
}

/// `G` and its gradient on a cached coefficient lattice.
#[derive(Debug, Clone)]
pub struct AnnuityKernel {
    lattice: AffineLattice,
    discount: Vec<f64>,
    growth: Vec<[f64; 2]>,
    dim: usize,
    phi: f64,
    t_max: f64,
}

impl AnnuityKernel {
    pub fn new(model: &MortalityModel, scenario: &SchemeScenario, r: f64) -> Result<Self> {
        Self::with_step(model, scenario.phi, r, scenario.t_max, DEFAULT_LATTICE_STEP)
    }

    pub fn with_step(model: &MortalityModel, phi: f64, r: f64, t_max: f64, step: f64) -> Result<Self> {
        if !(phi >= 0.0) {
            return Err(Error::config(format!("phi must be non-negative, got {phi}")));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::config(format!("t_max must be positive, got {t_max}")));
        }
        // One spare node for the interpolated tail.
        let lattice = AffineLattice::new(model, t_max + step, step)?;
        let discount = (0..lattice.len())
            .map(|k| (-r * k as f64 * step).exp())
            .collect();
        let growth = (0..lattice.len())
            .map(|k| lattice.growth(k as f64 * step))
            .collect();
        Ok(Self {
            lattice,
            discount,
            growth,
            dim: model.dim(),
            phi,
            t_max,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn value(&self, t: f64, lambda: [f64; 2]) -> Result<f64> {
        self.value_and_gradient(t, lambda).map(|(g, _)| g)
    }

    /// `(G, ∂G/∂λ)`; the second gradient slot is zero for one factor.
    pub fn value_and_gradient(&self, t: f64, lambda: [f64; 2]) -> Result<(f64, [f64; 2])> {
        if !(t >= 0.0) || t > self.t_max {
            return Err(Error::domain(format!("t = {t} outside [0, {}]", self.t_max)));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::domain("hazard must be finite"));
        }
        let delta = self.lattice.step();
        let span = self.t_max - t;
        let k_max = ((span / delta) + 1e-9).floor() as usize;
        let k_max = k_max.min(self.lattice.len() - 2);
        let remainder = (span - k_max as f64 * delta).max(0.0);
        let base = self.lattice.growth(t);

        let integrand = |k: usize| -> [f64; 3] {
            let g = self.growth[k];
            let (c0, mean) = self.lattice.evaluate(k, [base[0] * g[0], base[1] * g[1]], lambda);
            let node = self.lattice.node(k);
            let h = self.discount[k] * (c0 - node.c[0] * lambda[0] - node.c[1] * lambda[1]).exp();
            let weight = 1.0 + self.phi * mean;
            [
                h * weight,
                h * (self.phi * node.p[0] - node.c[0] * weight),
                h * (self.phi * node.p[1] - node.c[1] * weight),
            ]
        };

        let mut acc = [0.0; 3];
        let mut add = |k: usize, w: f64| {
            let v = integrand(k);
            for i in 0..3 {
                acc[i] += w * v[i];
            }
        };
        match k_max {
            0 => {}
            1 => {
                add(0, 0.5 * delta);
                add(1, 0.5 * delta);
            }
            _ => {
                // Simpson on an even number of panels, 3/8 rule on the last three if odd.
                let even_end = if k_max % 2 == 0 { k_max } else { k_max - 3 };
                if even_end > 0 {
                    for k in 0..=even_end {
                        let w = if k == 0 || k == even_end {
                            1.0
                        } else if k % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        add(k, w * delta / 3.0);
                    }
                }
                if even_end < k_max {
                    for (i, w) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
                        add(even_end + i, 3.0 * delta / 8.0 * w);
                    }
                }
            }
        }
        if remainder > 1e-12 {
            // Trapezoid over the sub-step tail with a linearly interpolated end value.
            let (a, b) = (integrand(k_max), integrand(k_max + 1));
            let frac = remainder / delta;
            for i in 0..3 {
                let end = a[i] + frac * (b[i] - a[i]);
                acc[i] += 0.5 * remainder * (a[i] + end);
            }
        }

        if acc.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "annuity G",
                format!("non-finite value at t = {t}, lambda = {lambda:?}"),
            ));
        }
        let grad = if self.dim == 1 { [acc[1], 0.0] } else { [acc[1], acc[2]] };
        Ok((acc[0], grad))
    }
}

/// Annuity-like value `G(t, λ)`.
pub fn annuity_g(model: &MortalityModel, scenario: &SchemeScenario, market: &MarketParams, t: f64, lambda: [f64; 2]) -> Result<f64> {
    AnnuityKernel::new(model, scenario, market.r)?.value(t, lambda)
}

/// `∂G/∂λ` per hazard component.
pub fn annuity_g_gradient(
    model: &MortalityModel,
    scenario: &SchemeScenario,
    market: &MarketParams,
    t: f64,
    lambda: [f64; 2],
) -> Result<[f64; 2]> {
    AnnuityKernel::new(model, scenario, market.r)?
        .value_and_gradient(t, lambda)
        .map(|(_, g)| g)
}

/// Policy evaluator holding the kernel for repeated calls.
#[derive(Debug, Clone)]
pub struct PolicyEngine {
    model: MortalityModel,
    market: MarketParams,
    kernel: AnnuityKernel,
}

impl PolicyEngine {
    pub fn new(model: &MortalityModel, scenario: &SchemeScenario, market: &MarketParams) -> Result<Self> {
        model.validate()?;
        market.validate()?;
        scenario.validate()?;
        if scenario.pi != 1.0 {
            return Err(Error::Unsupported(format!(
                "the optimal policy is only available for pi = 1, got {}",
                scenario.pi
            )));
        }
        Ok(Self {
            model: *model,
            market: *market,
            kernel: AnnuityKernel::new(model, scenario, market.r)?,
        })
    }

    pub fn kernel(&self) -> &AnnuityKernel {
        &self.kernel
    }

    pub fn model(&self) -> &MortalityModel {
        &self.model
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    fn check_wealth(wealth: f64) -> Result<()> {
        if !(wealth > 0.0) || !wealth.is_finite() {
            return Err(Error::domain(format!("wealth must be positive, got {wealth}")));
        }
        Ok(())
    }

    pub fn optimal(&self, t: f64, lambda: [f64; 2], wealth: f64) -> Result<PolicyDecision> {
        Self::check_wealth(wealth)?;
        let (g, grad) = self.kernel.value_and_gradient(t, lambda)?;
        let stock = self.market.theta_s / self.market.sigma_s;
        let bond = self.bond_weight(g, grad);
        Ok(PolicyDecision::new(wealth / g, stock, bond))
    }

    pub fn no_bond(&self, t: f64, lambda: [f64; 2], wealth: f64) -> Result<PolicyDecision> {
        Self::check_wealth(wealth)?;
        let g = self.kernel.value(t, lambda)?;
        Ok(PolicyDecision::new(
            wealth / g,
            self.market.theta_s / self.market.sigma_s,
            0.0,
        ))
    }

    /// Market-price term plus hedge of the hazards' exposure to `W_1`.
    ///
    /// With `σ_L = -A1(T_L) σ_1 [sqrt(λ_1)]` the weight is
    /// `-(θ_1 + (σ_1 G_λ1 + σ_21 G_λ2)/G) / (A1 σ_1)`; the CIR `sqrt(λ_1)`
    /// factors of premium, exposure and bond volatility cancel.
    fn bond_weight(&self, g: f64, grad: [f64; 2]) -> f64 {
        let reference = self.model.reference();
        if reference.sigma == 0.0 {
            return 0.0;
        }
        let a1 = single_loading(reference.kind, reference.b, reference.sigma, self.market.bond_maturity);
        let exposure = match &self.model {
            MortalityModel::Single(m) => m.sigma * grad[0],
            MortalityModel::TwoPop(m) => m.sigma1 * grad[0] + m.sigma21 * grad[1],
        };
        -(self.market.theta1 + exposure / g) / (a1 * reference.sigma)
    }
}

/// Optimal withdrawal and investment at `(t, λ, Y)`.
pub fn optimal_policy(
    model: &MortalityModel,
    scenario: &SchemeScenario,
    market: &MarketParams,
    t: f64,
    lambda: [f64; 2],
    wealth: f64,
) -> Result<PolicyDecision> {
    PolicyEngine::new(model, scenario, market)?.optimal(t, lambda, wealth)
}

/// Same withdrawal as [`optimal_policy`] without the longevity bond.
pub fn no_bond_policy(
    model: &MortalityModel,
    scenario: &SchemeScenario,
    market: &MarketParams,
    t: f64,
    lambda: [f64; 2],
    wealth: f64,
) -> Result<PolicyDecision> {
    PolicyEngine::new(model, scenario, market)?.no_bond(t, lambda, wealth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::{Dynamics, GompertzMakehamParams, SinglePopModel};

    fn market() -> MarketParams {
        MarketParams {
            r: 0.04,
            theta_s: 0.05,
            sigma_s: 0.15,
            theta1: -0.0005,
            bond_maturity: 20.0,
        }
    }

    fn model(kind: Dynamics) -> MortalityModel {
        let gm = GompertzMakehamParams::new(0.0009944, 11.4, 86.4515)
            .unwrap()
            .with_start_age(65.0)
            .unwrap();
        SinglePopModel::new(kind, gm, 0.561, 0.0035).unwrap().into()
    }

    #[test]
    fn frozen_hazard_annuity() {
        // ν = λ0 with a negligible exponential term keeps the hazard constant.
        let lam0 = 1.0390e-3;
        let gm = GompertzMakehamParams::new(lam0, 11.4, 1e5).unwrap();
        let m: MortalityModel = SinglePopModel::new(Dynamics::Ou, gm, 0.561, 0.0).unwrap().into();
        let scenario = SchemeScenario::with_defaults(0.0, 100.0);
        let g = annuity_g(&m, &scenario, &market(), 0.0, [lam0, 0.0]).unwrap();
        let exact = (1.0 - (-(0.04 + lam0) * 120.0f64).exp()) / (0.04 + lam0);
        assert!((g - exact).abs() < 1e-8, "{g} vs {exact}");
        assert!((g - 24.19).abs() < 0.01);
    }

    #[test]
    fn tail_integration_off_lattice() {
        let lam0 = 0.01;
        let gm = GompertzMakehamParams::new(lam0, 11.4, 1e5).unwrap();
        let m: MortalityModel = SinglePopModel::new(Dynamics::Ou, gm, 0.5, 0.0).unwrap().into();
        let kernel = AnnuityKernel::with_step(&m, 0.0, 0.04, 120.0, 0.05).unwrap();
        for t in [0.013, 7.77, 119.98] {
            let exact = (1.0 - (-(0.04 + lam0) * (120.0 - t)).exp()) / (0.04 + lam0);
            assert!((kernel.value(t, [lam0, 0.0]).unwrap() - exact).abs() < 1e-8);
        }
        assert_eq!(kernel.value(120.0, [lam0, 0.0]).unwrap(), 0.0);
        assert!(kernel.value(121.0, [lam0, 0.0]).is_err());
    }

    #[test]
    fn stock_weight_and_sum() {
        let scenario = SchemeScenario::with_defaults(0.8, 100.0);
        for kind in [Dynamics::Ou, Dynamics::Cir] {
            let engine = PolicyEngine::new(&model(kind), &scenario, &market()).unwrap();
            for t in [0.0, 10.0, 34.9] {
                let d = engine.optimal(t, [0.02, 0.0], 50.0).unwrap();
                assert_eq!(d.stock_weight, 0.05 / 0.15);
                assert_eq!(d.stock_weight + d.bond_weight + d.cash_weight, 1.0);
                assert!(d.bond_weight > d.stock_weight);
                let n = engine.no_bond(t, [0.02, 0.0], 50.0).unwrap();
                assert_eq!(n.withdraw_rate, d.withdraw_rate);
                assert_eq!((n.bond_weight, n.stock_weight + n.cash_weight), (0.0, 1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut scenario = SchemeScenario::with_defaults(0.8, 100.0);
        let m = model(Dynamics::Ou);
        assert!(matches!(
            optimal_policy(&m, &scenario, &market(), 0.0, [0.02, 0.0], 0.0),
            Err(Error::Domain(_))
        ));
        scenario.pi = 0.5;
        assert!(matches!(
            optimal_policy(&m, &scenario, &market(), 0.0, [0.02, 0.0], 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cir_bond_weight_continuous_at_zero_hazard() {
        let engine = PolicyEngine::new(&model(Dynamics::Cir), &SchemeScenario::with_defaults(0.8, 1.0), &market()).unwrap();
        let w0 = engine.optimal(1.0, [0.0, 0.0], 1.0).unwrap().bond_weight;
        let w1 = engine.optimal(1.0, [1e-10, 0.0], 1.0).unwrap().bond_weight;
        assert!(w0.is_finite() && (w0 - w1).abs() < 1e-8);
    }
}
