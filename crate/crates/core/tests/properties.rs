mod common;

use common::*;
use drawdown::affine::{coeffs, survival_expectation};
use drawdown::control::PolicyEngine;
use drawdown::experiments::csv::format_number;
use drawdown::experiments::parse_config;
use drawdown::mortality::{simulate_path, Dynamics};
use drawdown::numerics::{integrate, TimeGrid, Tolerance};
use proptest::prelude::*;
use std::sync::OnceLock;

fn engines() -> &'static Vec<(&'static str, PolicyEngine)> {
    static ENGINES: OnceLock<Vec<(&'static str, PolicyEngine)>> = OnceLock::new();
    ENGINES.get_or_init(|| {
        let cfg = table1_config();
        all_models(65.0)
            .into_iter()
            .map(|(name, m)| (name, PolicyEngine::new(&m, &cfg.scenario, &cfg.market).unwrap()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, lo in -2.0f64..2.0, width in 0.1f64..10.0) {
        let tol = Tolerance::new(1e-12, 25).unwrap();
        let f = |x: f64| (0.3 * x).exp();
        let g = |x: f64| x * x - 2.0 * x;
        let hi = lo + width;
        let combined = integrate(|x| a * f(x) + b * g(x), lo, hi, &tol).unwrap();
        let separate = a * integrate(f, lo, hi, &tol).unwrap() + b * integrate(g, lo, hi, &tol).unwrap();
        prop_assert!((combined - separate).abs() < 1e-9 * (1.0 + separate.abs()));
    }

    #[test]
    fn policy_weights_sum_to_one_and_ignore_wealth(
        model in 0usize..4,
        t in 0.0f64..35.0,
        l1 in 0.001f64..0.3,
        l2 in 0.001f64..0.3,
        y in 1e-3f64..1e4,
        scale in 0.01f64..100.0,
    ) {
        let (name, engine) = &engines()[model];
        let d = engine.optimal(t, [l1, l2], y).unwrap();
        let e = engine.optimal(t, [l1, l2], y * scale).unwrap();
        prop_assert_eq!(d.stock_weight + d.bond_weight + d.cash_weight, 1.0, "{}", name);
        prop_assert_eq!((d.stock_weight, d.bond_weight, d.cash_weight), (e.stock_weight, e.bond_weight, e.cash_weight));
        prop_assert!(d.withdraw_rate > 0.0 && d.withdraw_rate < y);
        prop_assert!(((e.withdraw_rate / d.withdraw_rate) / scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cir_survival_is_a_probability(two in any::<bool>(), t in 0.0f64..30.0, tau in 0.01f64..40.0,
                                     l1 in 0.0f64..0.3, l2 in 0.0f64..0.3) {
        let model = if two { two_pop(Dynamics::Cir, 65.0) } else { single(Dynamics::Cir, 65.0) };
        let tol = Tolerance::default();
        let lambda = [l1, l2];
        let near = survival_expectation(&coeffs(&model, t, t + tau, &tol).unwrap(), &lambda[..model.dim()]);
        let far = survival_expectation(&coeffs(&model, t, t + 2.0 * tau, &tol).unwrap(), &lambda[..model.dim()]);
        prop_assert!(near > 0.0 && near <= 1.0);
        prop_assert!(far <= near);
    }

    #[test]
    fn simulated_cir_survival_decreases(seed in any::<u64>(), path in 0u64..1000, two in any::<bool>()) {
        let model = if two { two_pop(Dynamics::Cir, 65.0) } else { single(Dynamics::Cir, 65.0) };
        let grid = TimeGrid::new(0.0, 35.0, 0.1).unwrap();
        let sim = simulate_path(&model, &grid, seed, path);
        prop_assert_eq!(sim.survival[0], 1.0);
        prop_assert!(non_increasing(&sim.survival));
        prop_assert!(sim.survival.iter().all(|&s| s > 0.0));
        prop_assert!(sim.lambda.iter().all(|l| l[0] >= 0.0 && l[1] >= 0.0));
    }

    #[test]
    fn csv_numbers_keep_nine_digits(x in prop::num::f64::NORMAL) {
        let text = format_number(x);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{} -> {}", x, text);
        prop_assert!(!text.contains(' '));
    }

    #[test]
    fn config_round_trips(phi in 0.0f64..1.0, theta1 in -0.01f64..0.0, seed in 0u64..=i64::MAX as u64,
                          n_paths in 1usize..10_000, model in prop::sample::select(vec!["ou-single", "cir-single", "ou-sub", "cir-sub"])) {
        let text = std::fs::read_to_string(table1_path()).unwrap()
            .replace("phi = 0.8", &format!("phi = {phi:?}"))
            .replace("theta1 = -0.0005", &format!("theta1 = {theta1:?}"))
            .replace("seed = 42", &format!("seed = {seed}"))
            .replace("n_paths = 100", &format!("n_paths = {n_paths}"))
            .replace("\"ou-single\"", &format!("\"{model}\""));
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.scenario.phi, phi);
        prop_assert_eq!(cfg.scenario.seed, seed);
        let again = parse_config(&cfg.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(again, cfg);
    }
}
