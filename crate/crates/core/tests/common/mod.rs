#![allow(dead_code)]

use drawdown::affine::MarketParams;
use drawdown::experiments::{load_config, ExperimentConfig};
use drawdown::mortality::{Dynamics, GompertzMakehamParams, MortalityModel, SinglePopModel, TwoPopModel};
use rayon::prelude::*;
use std::path::PathBuf;

pub fn gm1(age: f64) -> GompertzMakehamParams {
    GompertzMakehamParams::new(0.0009944, 11.4, 86.4515)
        .unwrap()
        .with_start_age(age)
        .unwrap()
}

pub fn gm2(age: f64) -> GompertzMakehamParams {
    GompertzMakehamParams::new(0.0009944, 12.9374, 89.18)
        .unwrap()
        .with_start_age(age)
        .unwrap()
}

pub fn single(kind: Dynamics, age: f64) -> MortalityModel {
    SinglePopModel::new(kind, gm1(age), 0.561, 0.0035).unwrap().into()
}

pub fn two_pop(kind: Dynamics, age: f64) -> MortalityModel {
    TwoPopModel {
        kind,
        gm1: gm1(age),
        gm2: gm2(age),
        b1: 0.561,
        b21: 0.0028,
        b22: 0.65,
        sigma1: 0.0035,
        sigma21: 0.004,
        sigma22: 0.005,
    }
    .into()
}

/// The four model variants at the given age offset.
pub fn all_models(age: f64) -> Vec<(&'static str, MortalityModel)> {
    vec![
        ("ou-single", single(Dynamics::Ou, age)),
        ("cir-single", single(Dynamics::Cir, age)),
        ("ou-sub", two_pop(Dynamics::Ou, age)),
        ("cir-sub", two_pop(Dynamics::Cir, age)),
    ]
}

pub fn market() -> MarketParams {
    MarketParams {
        r: 0.04,
        theta_s: 0.05,
        sigma_s: 0.15,
        theta1: -0.0005,
        bond_maturity: 20.0,
    }
}

pub fn table1_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/table1.cfg")
}

pub fn table1_config() -> ExperimentConfig {
    load_config(&table1_path()).unwrap()
}

/// Sample means and standard errors of per-path statistics, reduced in path order.
pub fn monte_carlo<F>(n_paths: u64, stat: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    let samples: Vec<Vec<f64>> = (0..n_paths).into_par_iter().map(&stat).collect();
    let dim = samples[0].len();
    let n = n_paths as f64;
    let mut mean = vec![0.0; dim];
    for s in &samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for s in &samples {
        for i in 0..dim {
            var[i] += (s[i] - mean[i]).powi(2);
        }
    }
    let se = var.iter().map(|v| (v / (n - 1.0)).sqrt() / n.sqrt()).collect();
    (mean, se)
}

/// Uniform draws in `[0, 1)` from a fixed seed.
pub struct Uniform(rand_chacha::ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        use rand_core::SeedableRng;
        Self(rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next(&mut self) -> f64 {
        use rand_core::RngCore;
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

/// True when `xs` never increases.
pub fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

pub fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

/// Values at whole years of a series on a 0.1-year grid.
pub fn yearly(xs: &[f64]) -> Vec<f64> {
    xs.iter().step_by(10).copied().collect()
}
