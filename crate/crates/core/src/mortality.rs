//! Gompertz–Makeham drift, OU/CIR force-of-mortality models and their Euler
//! simulation.
//!
//! All models use the mean-reverting convention
//! `dλ_i = (a_i(t) - Σ_j b_ij λ_j) dt + Σ_k σ_ik dW_k`,
//! with the CIR variants scaling column `k` of the loading by `sqrt(λ_k)`.

use crate::error::{Error, Result};
use crate::numerics::{gaussian_stream, TimeGrid};
use rayon::prelude::*;

/// OU or CIR noise specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dynamics {
    Ou,
    Cir,
}

/// Baseline hazard curve `ν + (1/Δ) exp((x - m)/Δ)` with `x = start_age + t`.
///
/// `start_age = 0` evaluates the curve directly in time since the start of
/// the simulation; setting it to the members' age at `t = 0` measures `m` as
/// a calendar age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GompertzMakehamParams {
    pub nu: f64,
    pub delta: f64,
    pub m: f64,
    pub start_age: f64,
}

impl GompertzMakehamParams {
    pub fn new(nu: f64, delta: f64, m: f64) -> Result<Self> {
        let gm = Self {
            nu,
            delta,
            m,
            start_age: 0.0,
        };
        gm.validate()?;
        Ok(gm)
    }

    pub fn with_start_age(mut self, start_age: f64) -> Result<Self> {
        self.start_age = start_age;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.m > 0.0) {
            return Err(Error::config(format!("m must be positive, got {}", self.m)));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::config(format!("nu must be non-negative, got {}", self.nu)));
        }
        if !self.start_age.is_finite() || self.start_age < 0.0 {
            return Err(Error::config(format!(
                "start_age must be finite and non-negative, got {}",
                self.start_age
            )));
        }
        Ok(())
    }

    fn growth(&self, t: f64) -> f64 {
        ((self.start_age + t - self.m) / self.delta).exp()
    }

    /// Gompertz–Makeham hazard at time `t`.
    pub fn hazard(&self, t: f64) -> f64 {
        self.nu + self.growth(t) / self.delta
    }

    /// Constant part of `a(t)` for mean-reversion speed `b`.
    pub(crate) fn drift_constant(&self, b: f64) -> f64 {
        b * self.nu
    }

    /// Coefficient `c` in `a(t) = b ν + c exp(t / Δ)`.
    pub(crate) fn drift_exp_coeff(&self, b: f64) -> f64 {
        b / self.delta * (1.0 + 1.0 / (b * self.delta)) * ((self.start_age - self.m) / self.delta).exp()
    }
}

/// Hazard at `t = 0`.
pub fn initial_hazard(gm: &GompertzMakehamParams) -> f64 {
    gm.hazard(0.0)
}

/// Drift level `a(t) = b (ν + (1/Δ)(1 + 1/(bΔ)) exp((x - m)/Δ))`; the
/// deterministic path of `dλ = (a(t) - bλ) dt` started at the curve stays on it.
pub fn drift_a(t: f64, gm: &GompertzMakehamParams, b: f64) -> f64 {
    b * (gm.nu + (1.0 + 1.0 / (b * gm.delta)) * gm.growth(t) / gm.delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePopModel {
    pub kind: Dynamics,
    pub gm: GompertzMakehamParams,
    pub b: f64,
    pub sigma: f64,
}

impl SinglePopModel {
    pub fn new(kind: Dynamics, gm: GompertzMakehamParams, b: f64, sigma: f64) -> Result<Self> {
        let model = Self { kind, gm, b, sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.gm.validate()?;
        if !(self.b > 0.0) {
            return Err(Error::config(format!("b must be positive, got {}", self.b)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Reference population 1 and members' sub-population 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPopModel {
    pub kind: Dynamics,
    pub gm1: GompertzMakehamParams,
    pub gm2: GompertzMakehamParams,
    pub b1: f64,
    pub b21: f64,
    pub b22: f64,
    pub sigma1: f64,
    pub sigma21: f64,
    pub sigma22: f64,
}

impl TwoPopModel {
    pub fn validate(&self) -> Result<()> {
        self.gm1.validate()?;
        self.gm2.validate()?;
        if !(self.b1 > 0.0) {
            return Err(Error::config(format!("b1 must be positive, got {}", self.b1)));
        }
        if !(self.b22 > 0.0) {
            return Err(Error::config(format!("b22 must be positive, got {}", self.b22)));
        }
        if !self.b21.is_finite() {
            return Err(Error::config("b21 must be finite"));
        }
        if self.kind == Dynamics::Ou && self.b1 == self.b22 {
            return Err(Error::config(
                "b1 equals b22: the two-population OU survival coefficients are singular",
            ));
        }
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("sigma21", self.sigma21),
            ("sigma22", self.sigma22),
        ] {
            if !(v >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Population 1 on its own; it drives the rolling longevity bond.
    pub fn reference(&self) -> SinglePopModel {
        SinglePopModel {
            kind: self.kind,
            gm: self.gm1,
            b: self.b1,
            sigma: self.sigma1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MortalityModel {
    Single(SinglePopModel),
    TwoPop(TwoPopModel),
}

impl From<SinglePopModel> for MortalityModel {
    fn from(m: SinglePopModel) -> Self {
        MortalityModel::Single(m)
    }
}

impl From<TwoPopModel> for MortalityModel {
    fn from(m: TwoPopModel) -> Self {
        MortalityModel::TwoPop(m)
    }
}

impl MortalityModel {
    pub fn kind(&self) -> Dynamics {
        match self {
            MortalityModel::Single(m) => m.kind,
            MortalityModel::TwoPop(m) => m.kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MortalityModel::Single(m) => m.validate(),
            MortalityModel::TwoPop(m) => m.validate(),
        }
    }

    /// Number of hazard factors.
    pub fn dim(&self) -> usize {
        match self {
            MortalityModel::Single(_) => 1,
            MortalityModel::TwoPop(_) => 2,
        }
    }

    /// Index of the members' hazard in the state vector.
    pub fn members(&self) -> usize {
        self.dim() - 1
    }

    /// Population referenced by the longevity bond.
    pub fn reference(&self) -> SinglePopModel {
        match self {
            MortalityModel::Single(m) => *m,
            MortalityModel::TwoPop(m) => m.reference(),
        }
    }

    /// Hazards at `t = 0` from the Gompertz–Makeham curves; unused slots are zero.
    pub fn initial_state(&self) -> [f64; 2] {
        match self {
            MortalityModel::Single(m) => [initial_hazard(&m.gm), 0.0],
            MortalityModel::TwoPop(m) => [initial_hazard(&m.gm1), initial_hazard(&m.gm2)],
        }
    }

    pub(crate) fn affine_form(&self) -> AffineForm {
        match self {
            MortalityModel::Single(m) => AffineForm {
                kind: m.kind,
                dim: 1,
                members: 0,
                mean_reversion: [[m.b, 0.0], [0.0, 0.0]],
                loading: [[m.sigma, 0.0], [0.0, 0.0]],
                drift_const: [m.gm.drift_constant(m.b), 0.0],
                drift_exp: [m.gm.drift_exp_coeff(m.b), 0.0],
                drift_rate: [1.0 / m.gm.delta, 0.0],
            },
            // Population 2 uses b22 as the scale of its own Gompertz–Makeham drift.
            MortalityModel::TwoPop(m) => AffineForm {
                kind: m.kind,
                dim: 2,
                members: 1,
                mean_reversion: [[m.b1, 0.0], [m.b21, m.b22]],
                loading: [[m.sigma1, 0.0], [m.sigma21, m.sigma22]],
                drift_const: [m.gm1.drift_constant(m.b1), m.gm2.drift_constant(m.b22)],
                drift_exp: [m.gm1.drift_exp_coeff(m.b1), m.gm2.drift_exp_coeff(m.b22)],
                drift_rate: [1.0 / m.gm1.delta, 1.0 / m.gm2.delta],
            },
        }
    }
}

/// Flattened affine description shared by the simulator and the coefficient lattice.
///
/// `a_i(u) = drift_const[i] + drift_exp[i] * exp(drift_rate[i] * u)`;
/// `loading[i][k]` is the exposure of `λ_i` to `W_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AffineForm {
    pub kind: Dynamics,
    pub dim: usize,
    pub members: usize,
    pub mean_reversion: [[f64; 2]; 2],
    pub loading: [[f64; 2]; 2],
    pub drift_const: [f64; 2],
    pub drift_exp: [f64; 2],
    pub drift_rate: [f64; 2],
}

impl AffineForm {
    pub fn drift(&self, i: usize, u: f64) -> f64 {
        self.drift_const[i] + self.drift_exp[i] * (self.drift_rate[i] * u).exp()
    }
}

/// One simulated path: hazards per node and the members' survival index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub lambda: Vec<[f64; 2]>,
    pub survival: Vec<f64>,
}

/// Stream index of the mortality shocks for a path.
pub(crate) fn mortality_stream(path_index: u64) -> u64 {
    path_index
}

/// Brownian increments `(dW_1, dW_2)` driving a path, one entry per grid step.
/// The second slot is zero for single-population models.
pub fn brownian_increments(dim: usize, grid: &TimeGrid, seed: u64, path_index: u64) -> Vec<[f64; 2]> {
    let mut stream = gaussian_stream(seed, mortality_stream(path_index));
    let sqrt_dt = grid.step().sqrt();
    (0..grid.steps())
        .map(|_| {
            let mut dw = [0.0; 2];
            for w in dw.iter_mut().take(dim) {
                *w = sqrt_dt * stream.next_normal();
            }
            dw
        })
        .collect()
}

/// Euler–Maruyama path of the hazards. CIR uses full truncation: the state may
/// dip below zero but only its positive part enters drift, diffusion and the
/// reported hazard.
pub fn simulate_path(model: &MortalityModel, grid: &TimeGrid, seed: u64, path_index: u64) -> SimulatedPath {
    let form = model.affine_form();
    let increments = brownian_increments(form.dim, grid, seed, path_index);
    simulate_with_increments(&form, grid, model.initial_state(), &increments)
}

pub(crate) fn simulate_with_increments(
    form: &AffineForm,
    grid: &TimeGrid,
    start: [f64; 2],
    increments: &[[f64; 2]],
) -> SimulatedPath {
    let n = form.dim;
    let dt = grid.step();
    let nodes = grid.nodes();
    let cir = form.kind == Dynamics::Cir;
    let clamp = |x: [f64; 2]| if cir { [x[0].max(0.0), x[1].max(0.0)] } else { x };

    let mut state = start;
    let mut lambda = Vec::with_capacity(nodes.len());
    let mut survival = Vec::with_capacity(nodes.len());
    lambda.push(clamp(state));
    survival.push(1.0);

    for (k, dw) in increments.iter().enumerate() {
        let t = nodes[k];
        let pos = clamp(state);
        let mut next = state;
        for i in 0..n {
            let mut drift = form.drift(i, t);
            let mut diffusion = 0.0;
            for j in 0..n {
                drift -= form.mean_reversion[i][j] * pos[j];
                let scale = if cir { pos[j].sqrt() } else { 1.0 };
                diffusion += form.loading[i][j] * scale * dw[j];
            }
            next[i] = state[i] + drift * dt + diffusion;
        }
        state = next;
        let reported = clamp(state);
        let m = form.members;
        let prev = lambda[k][m];
        let p = survival[k] * (-0.5 * (prev + reported[m]) * dt).exp();
        lambda.push(reported);
        survival.push(p);
    }
    SimulatedPath { lambda, survival }
}

/// Simulated hazard paths with the members' survival index.
///
/// The Brownian increments are not stored: they are a pure function of
/// `(seed, path)` and [`MortalityPaths::increments`] regenerates them
/// bit-for-bit for reuse in the wealth simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityPaths {
    grid: TimeGrid,
    seed: u64,
    dim: usize,
    lambda1: Vec<Vec<f64>>,
    lambda2: Option<Vec<Vec<f64>>>,
    survival: Vec<Vec<f64>>,
}

impl MortalityPaths {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.survival.len()
    }

    pub fn lambda1(&self, path: usize) -> &[f64] {
        &self.lambda1[path]
    }

    pub fn lambda2(&self, path: usize) -> Option<&[f64]> {
        self.lambda2.as_ref().map(|l| l[path].as_slice())
    }

    /// Hazard of the scheme members (population 2 when present).
    pub fn members_lambda(&self, path: usize) -> &[f64] {
        self.lambda2(path).unwrap_or(&self.lambda1[path])
    }

    pub fn survival(&self, path: usize) -> &[f64] {
        &self.survival[path]
    }

    /// Full hazard state at node `k`.
    pub fn state(&self, path: usize, k: usize) -> [f64; 2] {
        [
            self.lambda1[path][k],
            self.lambda2(path).map_or(0.0, |l| l[k]),
        ]
    }

    pub fn increments(&self, path: usize) -> Vec<[f64; 2]> {
        brownian_increments(self.dim, &self.grid, self.seed, path as u64)
    }
}

/// Simulates `n_paths` independent paths in parallel; path `p` depends only on `(seed, p)`.
pub fn simulate_paths(
    model: &MortalityModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<MortalityPaths> {
    model.validate()?;
    if n_paths == 0 {
        return Err(Error::config("n_paths must be at least 1"));
    }
    if grid.steps() == 0 {
        return Err(Error::config("simulation grid needs at least one step"));
    }
    let sims: Vec<SimulatedPath> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(model, grid, seed, p))
        .collect();

    let dim = model.dim();
    let mut lambda1 = Vec::with_capacity(n_paths);
    let mut lambda2 = (dim == 2).then(|| Vec::with_capacity(n_paths));
    let mut survival = Vec::with_capacity(n_paths);
    for sim in sims {
        lambda1.push(sim.lambda.iter().map(|l| l[0]).collect());
        if let Some(l2) = lambda2.as_mut() {
            l2.push(sim.lambda.iter().map(|l| l[1]).collect());
        }
        survival.push(sim.survival);
    }
    Ok(MortalityPaths {
        grid: grid.clone(),
        seed,
        dim,
        lambda1,
        lambda2,
        survival,
    })
}

/// Distribution of the members' death time on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathTimeDistribution {
    pub times: Vec<f64>,
    pub cdf: Vec<Vec<f64>>,
    pub density: Vec<Vec<f64>>,
    pub mean_cdf: Vec<f64>,
    pub mean_density: Vec<f64>,
}

/// `CDF = 1 - p(t)` per path and its centred-difference density
/// (one-sided at the grid ends), plus cross-path averages.
pub fn death_time_distribution(paths: &MortalityPaths) -> DeathTimeDistribution {
    let times = paths.grid().nodes().to_vec();
    let dt = paths.grid().step();
    let n = times.len();
    let mut cdf = Vec::with_capacity(paths.n_paths());
    let mut density = Vec::with_capacity(paths.n_paths());
    for p in 0..paths.n_paths() {
        let f: Vec<f64> = paths.survival(p).iter().map(|s| 1.0 - s).collect();
        let d: Vec<f64> = (0..n)
            .map(|k| {
                if n < 2 {
                    0.0
                } else if k == 0 {
                    (f[1] - f[0]) / dt
                } else if k == n - 1 {
                    (f[k] - f[k - 1]) / dt
                } else {
                    (f[k + 1] - f[k - 1]) / (2.0 * dt)
                }
            })
            .collect();
        cdf.push(f);
        density.push(d);
    }
    let mean_cdf = column_mean(&cdf, n);
    let mean_density = column_mean(&density, n);
    DeathTimeDistribution {
        times,
        cdf,
        density,
        mean_cdf,
        mean_density,
    }
}

pub(crate) fn column_mean(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut mean = vec![0.0; n];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let count = rows.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    mean
}
