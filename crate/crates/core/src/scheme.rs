//! Euler simulation of scheme wealth under a drawdown policy, discounted
//! totals and paired strategy comparisons on common random numbers.

use crate::affine::{rolling_bond_volatility, MarketParams};
use crate::control::{PolicyDecision, PolicyEngine, SchemeScenario};
use crate::error::{Error, Result};
use crate::mortality::{column_mean, simulate_paths, Dynamics, MortalityModel, MortalityPaths};
use crate::numerics::{gaussian_stream, TimeGrid};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// Offset between a path's mortality stream and its stock stream.
const STOCK_STREAM_OFFSET: u64 = 1 << 40;

/// Wealth floor as a fraction of the initial wealth.
const FLOOR_FRACTION: f64 = 1e-9;

/// User policy `(t, λ, Y) -> decision`.
pub type CustomPolicy = Arc<dyn Fn(f64, [f64; 2], f64) -> Result<PolicyDecision> + Send + Sync>;

#[derive(Clone)]
pub enum PolicyKind {
    Optimal,
    NoBond,
    Custom(CustomPolicy),
}

impl fmt::Debug for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Optimal => f.write_str("Optimal"),
            PolicyKind::NoBond => f.write_str("NoBond"),
            PolicyKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Per-path series on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeTrajectory {
    pub grid: TimeGrid,
    pub wealth: Vec<Vec<f64>>,
    pub withdraw: Vec<Vec<f64>>,
    pub compensation: Vec<Vec<f64>>,
    /// `(stock, bond, cash)` fractions of wealth.
    pub weights: Vec<Vec<[f64; 3]>>,
    pub survival: Vec<Vec<f64>>,
    /// Paths that hit the wealth floor and were frozen.
    pub floored: Vec<bool>,
}

impl SchemeTrajectory {
    pub fn n_paths(&self) -> usize {
        self.wealth.len()
    }

    pub fn floor_hits(&self) -> usize {
        self.floored.iter().filter(|&&f| f).count()
    }

    pub fn mean_wealth(&self) -> Vec<f64> {
        column_mean(&self.wealth, self.grid.len())
    }

    pub fn mean_withdraw(&self) -> Vec<f64> {
        column_mean(&self.withdraw, self.grid.len())
    }

    pub fn mean_compensation(&self) -> Vec<f64> {
        column_mean(&self.compensation, self.grid.len())
    }

    pub fn mean_survival(&self) -> Vec<f64> {
        column_mean(&self.survival, self.grid.len())
    }

    /// Cross-path mean of `β / Y`.
    pub fn mean_withdraw_fraction(&self) -> Vec<f64> {
        let ratios: Vec<Vec<f64>> = self
            .withdraw
            .iter()
            .zip(&self.wealth)
            .map(|(b, y)| b.iter().zip(y).map(|(b, y)| b / y).collect())
            .collect();
        column_mean(&ratios, self.grid.len())
    }

    /// Cross-path mean of the `(stock, bond, cash)` weights.
    pub fn mean_weights(&self) -> Vec<[f64; 3]> {
        let n = self.grid.len();
        let mut out = vec![[0.0; 3]; n];
        for path in &self.weights {
            for (o, w) in out.iter_mut().zip(path) {
                for i in 0..3 {
                    o[i] += w[i];
                }
            }
        }
        let count = self.n_paths().max(1) as f64;
        for o in &mut out {
            for v in o.iter_mut() {
                *v /= count;
            }
        }
        out
    }
}

/// Simulates `dY = [rY + α_S σ_S θ_S + α_L σ_L θ_1 - β] dt + α_S σ_S dW_S + α_L σ_L dW_1`
/// on the mortality paths, reusing their `W_1` increments.
///
/// The compensation `λ_members Y` equals the mortality credit when `π = 1`, so
/// neither appears in the wealth drift.
pub fn simulate_scheme(
    model: &MortalityModel,
    scenario: &SchemeScenario,
    market: &MarketParams,
    policy: &PolicyKind,
    paths: &MortalityPaths,
) -> Result<SchemeTrajectory> {
    let engine = PolicyEngine::new(model, scenario, market)?;
    let grid = scenario.grid()?;
    if paths.grid() != &grid {
        return Err(Error::config("mortality paths were generated on a different grid"));
    }
    if paths.dim() != model.dim() {
        return Err(Error::config("mortality paths do not match the model dimension"));
    }
    let results: Vec<PathResult> = (0..paths.n_paths())
        .into_par_iter()
        .map(|p| simulate_one(&engine, scenario, policy, paths, p))
        .collect::<Result<_>>()?;

    let mut traj = SchemeTrajectory {
        grid,
        wealth: Vec::with_capacity(results.len()),
        withdraw: Vec::with_capacity(results.len()),
        compensation: Vec::with_capacity(results.len()),
        weights: Vec::with_capacity(results.len()),
        survival: Vec::with_capacity(results.len()),
        floored: Vec::with_capacity(results.len()),
    };
    for (p, r) in results.into_iter().enumerate() {
        traj.wealth.push(r.wealth);
        traj.withdraw.push(r.withdraw);
        traj.compensation.push(r.compensation);
        traj.weights.push(r.weights);
        traj.survival.push(paths.survival(p).to_vec());
        traj.floored.push(r.floored);
    }
    Ok(traj)
}

struct PathResult {
    wealth: Vec<f64>,
    withdraw: Vec<f64>,
    compensation: Vec<f64>,
    weights: Vec<[f64; 3]>,
    floored: bool,
}

fn simulate_one(
    engine: &PolicyEngine,
    scenario: &SchemeScenario,
    policy: &PolicyKind,
    paths: &MortalityPaths,
    p: usize,
) -> Result<PathResult> {
    let model = engine.model();
    let market = engine.market();
    let grid = paths.grid();
    let nodes = grid.nodes();
    let dt = grid.step();
    let sqrt_dt = dt.sqrt();
    let members = model.members();
    let cir = model.kind() == Dynamics::Cir;
    let floor = FLOOR_FRACTION * scenario.y0;
    let dw1 = paths.increments(p);
    let mut stock_noise = gaussian_stream(paths.seed(), p as u64 + STOCK_STREAM_OFFSET);

    let n = nodes.len();
    let mut out = PathResult {
        wealth: Vec::with_capacity(n),
        withdraw: Vec::with_capacity(n),
        compensation: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        floored: false,
    };
    let mut y = scenario.y0;
    let mut last_weights = [0.0; 3];

    for (k, &t) in nodes.iter().enumerate() {
        let lambda = paths.state(p, k);
        out.wealth.push(y);
        out.compensation.push(lambda[members] * y);
        if out.floored {
            out.withdraw.push(0.0);
            out.weights.push(last_weights);
            continue;
        }
        let d = match policy {
            PolicyKind::Optimal => engine.optimal(t, lambda, y),
            PolicyKind::NoBond => engine.no_bond(t, lambda, y),
            PolicyKind::Custom(f) => f(t, lambda, y),
        }
        .map_err(|e| e.in_context(&format!("policy on path {p} at t = {t}")))?;
        last_weights = [d.stock_weight, d.bond_weight, d.cash_weight];
        out.withdraw.push(d.withdraw_rate);
        out.weights.push(last_weights);
        if k + 1 == n {
            break;
        }

        let sigma_l = rolling_bond_volatility(model, market, t, lambda[0])?;
        let theta1 = if cir {
            market.theta1 * lambda[0].max(0.0).sqrt()
        } else {
            market.theta1
        };
        let alpha_s = d.stock_weight * y;
        let alpha_l = d.bond_weight * y;
        let dws = sqrt_dt * stock_noise.next_normal();
        let drift = market.r * y + alpha_s * market.sigma_s * market.theta_s + alpha_l * sigma_l * theta1
            - d.withdraw_rate;
        let next = y + drift * dt + alpha_s * market.sigma_s * dws + alpha_l * sigma_l * dw1[k][0];
        if !next.is_finite() {
            return Err(Error::numerical(
                "simulate_scheme",
                format!("non-finite wealth on path {p} at t = {}", nodes[k + 1]),
            ));
        }
        if next <= floor {
            y = floor;
            out.floored = true;
        } else {
            y = next;
        }
    }
    Ok(out)
}

/// `∫_0^T e^{-rs} x(s) ds` by the trapezoidal rule on `times`.
pub fn discounted_total(times: &[f64], values: &[f64], r: f64) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * ((-r * t[0]).exp() * v[0] + (-r * t[1]).exp() * v[1]))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedTotals {
    pub benefit: Vec<f64>,
    pub compensation: Vec<f64>,
    pub mean_benefit: f64,
    pub mean_compensation: f64,
}

/// Discounted withdrawals and compensation per path and on average.
pub fn discounted_totals(traj: &SchemeTrajectory, r: f64) -> DiscountedTotals {
    let times = traj.grid.nodes();
    let benefit: Vec<f64> = traj.withdraw.iter().map(|b| discounted_total(times, b, r)).collect();
    let compensation: Vec<f64> = traj
        .compensation
        .iter()
        .map(|c| discounted_total(times, c, r))
        .collect();
    let n = benefit.len().max(1) as f64;
    DiscountedTotals {
        mean_benefit: benefit.iter().sum::<f64>() / n,
        mean_compensation: compensation.iter().sum::<f64>() / n,
        benefit,
        compensation,
    }
}

/// One side of a comparison.
#[derive(Debug, Clone)]
pub struct Arm {
    pub policy: PolicyKind,
    pub scenario: SchemeScenario,
    pub market: MarketParams,
}

/// Arm B measured against arm A on identical mortality and stock shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// `β_B - β_A` per path and time.
    pub delta_withdraw: Vec<Vec<f64>>,
    pub delta_compensation: Vec<Vec<f64>>,
    pub mean_delta_withdraw: Vec<f64>,
    pub mean_delta_compensation: Vec<f64>,
    /// Cross-path mean of `β_B / β_A - 1`.
    pub relative_withdraw: Vec<f64>,
    pub relative_compensation: Vec<f64>,
    pub totals_a: DiscountedTotals,
    pub totals_b: DiscountedTotals,
    pub trajectory_a: SchemeTrajectory,
    pub trajectory_b: SchemeTrajectory,
}

impl ComparisonReport {
    /// Relative change of the average discounted withdrawals.
    pub fn benefit_improvement(&self) -> f64 {
        self.totals_b.mean_benefit / self.totals_a.mean_benefit - 1.0
    }

    /// Relative change of the average discounted compensation.
    pub fn compensation_improvement(&self) -> f64 {
        self.totals_b.mean_compensation / self.totals_a.mean_compensation - 1.0
    }
}

/// Simulates both arms on the same mortality paths and stock streams.
pub fn compare_strategies(model: &MortalityModel, arm_a: &Arm, arm_b: &Arm) -> Result<ComparisonReport> {
    let (sa, sb) = (&arm_a.scenario, &arm_b.scenario);
    if sa.horizon != sb.horizon || sa.dt != sb.dt || sa.n_paths != sb.n_paths || sa.seed != sb.seed {
        return Err(Error::config(
            "compared arms must share horizon, dt, n_paths and seed",
        ));
    }
    if sa.y0 != sb.y0 {
        return Err(Error::config("compared arms must share the initial wealth"));
    }
    let grid = sa.grid()?;
    let paths = simulate_paths(model, &grid, sa.n_paths, sa.seed)?;
    let (ta, tb) = rayon::join(
        || simulate_scheme(model, sa, &arm_a.market, &arm_a.policy, &paths),
        || simulate_scheme(model, sb, &arm_b.market, &arm_b.policy, &paths),
    );
    let (ta, tb) = (ta?, tb?);
    Ok(build_report(ta, tb, arm_a.market.r, arm_b.market.r))
}

fn build_report(ta: SchemeTrajectory, tb: SchemeTrajectory, r_a: f64, r_b: f64) -> ComparisonReport {
    let n = ta.grid.len();
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| b - a).collect())
            .collect()
    };
    let relative = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let (sum, count) = a.iter().zip(b).fold((0.0, 0usize), |(s, c), (a, b)| {
                    if a[k] > 0.0 {
                        (s + b[k] / a[k] - 1.0, c + 1)
                    } else {
                        (s, c)
                    }
                });
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .collect()
    };
    let delta_withdraw = diff(&ta.withdraw, &tb.withdraw);
    let delta_compensation = diff(&ta.compensation, &tb.compensation);
    ComparisonReport {
        times: ta.grid.nodes().to_vec(),
        mean_delta_withdraw: column_mean(&delta_withdraw, n),
        mean_delta_compensation: column_mean(&delta_compensation, n),
        relative_withdraw: relative(&ta.withdraw, &tb.withdraw),
        relative_compensation: relative(&ta.compensation, &tb.compensation),
        delta_withdraw,
        delta_compensation,
        totals_a: discounted_totals(&ta, r_a),
        totals_b: discounted_totals(&tb, r_b),
        trajectory_a: ta,
        trajectory_b: tb,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::{GompertzMakehamParams, SinglePopModel};

    fn market() -> MarketParams {
        MarketParams {
            r: 0.04,
            theta_s: 0.05,
            sigma_s: 0.15,
            theta1: -0.0005,
            bond_maturity: 20.0,
        }
    }

    fn model() -> MortalityModel {
        let gm = GompertzMakehamParams::new(0.0009944, 11.4, 86.4515)
            .unwrap()
            .with_start_age(65.0)
            .unwrap();
        SinglePopModel::new(Dynamics::Ou, gm, 0.561, 0.0035).unwrap().into()
    }

    #[test]
    fn discounted_total_examples() {
        let g = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
        assert!((discounted_total(g.nodes(), &vec![1.0; g.len()], 0.0) - 1.0).abs() < 1e-12);
        let g = TimeGrid::new(0.0, 35.0, 0.1).unwrap();
        let ones = vec![1.0; g.len()];
        let v = discounted_total(g.nodes(), &ones, 0.04);
        let exact = (1.0 - (-1.4f64).exp()) / 0.04;
        assert!((v - exact).abs() < 1e-3, "{v} vs {exact}");
        let twos = vec![2.0; g.len()];
        assert_eq!(discounted_total(g.nodes(), &twos, 0.04), 2.0 * v);
    }

    #[test]
    fn riskless_growth_without_withdrawals() {
        let m = MarketParams {
            theta_s: 0.0,
            theta1: 0.0,
            ..market()
        };
        let gm = GompertzMakehamParams::new(0.0009944, 11.4, 86.4515).unwrap();
        let flat: MortalityModel = SinglePopModel::new(Dynamics::Ou, gm, 0.561, 0.0).unwrap().into();
        // Euler's growth error is about r² dt T / 2, so dt = 0.01 keeps it under 1e-3.
        let scenario = SchemeScenario {
            n_paths: 3,
            dt: 0.01,
            ..SchemeScenario::with_defaults(0.8, 100.0)
        };
        let paths = simulate_paths(&flat, &scenario.grid().unwrap(), 3, 1).unwrap();
        let policy = PolicyKind::Custom(Arc::new(|_, _, _| {
            Ok(PolicyDecision {
                withdraw_rate: 0.0,
                stock_weight: 0.0,
                bond_weight: 0.0,
                cash_weight: 1.0,
            })
        }));
        let traj = simulate_scheme(&flat, &scenario, &m, &policy, &paths).unwrap();
        let exact = 100.0 * (0.04f64 * 35.0).exp();
        for w in &traj.wealth {
            assert!(((w.last().unwrap() - exact) / exact).abs() < 1e-3);
        }
    }

    #[test]
    fn withdraw_fraction_is_inverse_g() {
        let scenario = SchemeScenario {
            n_paths: 4,
            horizon: 5.0,
            ..SchemeScenario::with_defaults(0.8, 100.0)
        };
        let paths = simulate_paths(&model(), &scenario.grid().unwrap(), 4, 3).unwrap();
        let traj = simulate_scheme(&model(), &scenario, &market(), &PolicyKind::Optimal, &paths).unwrap();
        let engine = PolicyEngine::new(&model(), &scenario, &market()).unwrap();
        for p in 0..4 {
            for k in [0, 17, 50] {
                let t = traj.grid.nodes()[k];
                let g = engine.kernel().value(t, paths.state(p, k)).unwrap();
                let ratio = traj.withdraw[p][k] / traj.wealth[p][k];
                assert!((ratio * g - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_arms_have_zero_improvement() {
        let scenario = SchemeScenario {
            n_paths: 5,
            horizon: 3.0,
            ..SchemeScenario::with_defaults(0.8, 100.0)
        };
        let arm = Arm {
            policy: PolicyKind::Optimal,
            scenario,
            market: market(),
        };
        let rep = compare_strategies(&model(), &arm, &arm).unwrap();
        assert!(rep.mean_delta_withdraw.iter().all(|&d| d == 0.0));
        assert!(rep.delta_compensation.iter().flatten().all(|&d| d == 0.0));
        assert_eq!(rep.benefit_improvement(), 0.0);
        let other = Arm {
            scenario: SchemeScenario { dt: 0.05, ..scenario },
            ..arm.clone()
        };
        assert!(matches!(compare_strategies(&model(), &arm, &other), Err(Error::Config(_))));
    }
}
