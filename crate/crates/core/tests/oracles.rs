//! Independent oracles for the mortality, coefficient and annuity layers.

mod common;

use common::*;
use drawdown::affine::{coeffs, coeffs_single, coeffs_two_pop, survival_expectation, tilde_mean, AffineCoeffs};
use drawdown::control::AnnuityKernel;
use drawdown::mortality::{
    death_time_distribution, drift_a, initial_hazard, simulate_path, simulate_paths, Dynamics, MortalityModel,
    SinglePopModel, TwoPopModel,
};
use drawdown::numerics::{integrate, solve_ode, TimeGrid, Tolerance};

fn tol() -> Tolerance {
    Tolerance::new(1e-10, 30).unwrap()
}

#[test]
fn ou_sample_mean_follows_the_mean_ode() {
    let model = single(Dynamics::Ou, 0.0);
    let MortalityModel::Single(m) = model else { unreachable!() };
    let grid = TimeGrid::new(0.0, 35.0, 0.1).unwrap();
    let checkpoints = [100, 250, 350];
    let (mean, se) = monte_carlo(20_000, |p| {
        let path = simulate_path(&model, &grid, 3, p);
        checkpoints.iter().map(|&k| path.lambda[k][0]).collect()
    });
    let ode = solve_ode(
        |u, y, dy| dy[0] = drift_a(u, &m.gm, m.b) - m.b * y[0],
        0.0,
        35.0,
        &[initial_hazard(&m.gm)],
        0.01,
    )
    .unwrap();
    for (i, &k) in checkpoints.iter().enumerate() {
        let exact = ode.state(k * 10)[0];
        assert!((mean[i] - exact).abs() < 4.0 * se[i], "node {k}: {} vs {exact}", mean[i]);
    }
}

#[test]
fn noiseless_survival_is_multiplicative() {
    let m = SinglePopModel::new(Dynamics::Ou, gm1(65.0), 0.561, 0.0).unwrap();
    let model: MortalityModel = m.into();
    let lam0 = initial_hazard(&m.gm);
    let lam_u = solve_ode(|u, y, dy| dy[0] = drift_a(u, &m.gm, m.b) - m.b * y[0], 0.0, 10.0, &[lam0], 0.001)
        .unwrap()
        .last_state()[0];
    let whole = survival_expectation(&coeffs(&model, 0.0, 25.0, &tol()).unwrap(), &[lam0]);
    let first = survival_expectation(&coeffs(&model, 0.0, 10.0, &tol()).unwrap(), &[lam0]);
    let second = survival_expectation(&coeffs(&model, 10.0, 25.0, &tol()).unwrap(), &[lam_u]);
    assert!((whole - first * second).abs() < 1e-10, "{whole} vs {}", first * second);
}

#[test]
fn decoupled_members_match_a_single_population() {
    for kind in [Dynamics::Ou, Dynamics::Cir] {
        let MortalityModel::TwoPop(m) = two_pop(kind, 65.0) else { unreachable!() };
        let decoupled = TwoPopModel { b21: 0.0, sigma21: 0.0, ..m };
        let alone = SinglePopModel::new(kind, m.gm2, m.b22, m.sigma22).unwrap();
        for s in [1.0, 12.5, 40.0] {
            let c = coeffs_two_pop(&decoupled, 0.0, s, &tol()).unwrap();
            let a = coeffs_single(&alone, 0.0, s, &tol()).unwrap();
            assert!(c.c1.abs() < 1e-12, "{kind:?} C1 = {}", c.c1);
            assert!((c.c2 - a.a1).abs() < 1e-8, "{kind:?} C2 {} vs A1 {}", c.c2, a.a1);
            assert!((c.c0 - a.a0).abs() < 1e-6 * a.a0.abs().max(1.0), "{kind:?} C0 {} vs A0 {}", c.c0, a.a0);
        }
    }
}

#[test]
fn loadings_depend_only_on_time_to_maturity() {
    for (name, model) in all_models(65.0) {
        let (_, early) = coeffs(&model, 0.0, 7.5, &tol()).unwrap().parts();
        let (_, late) = coeffs(&model, 20.0, 27.5, &tol()).unwrap().parts();
        for i in 0..2 {
            assert!((early[i] - late[i]).abs() < 1e-9, "{name}: {early:?} vs {late:?}");
        }
    }
}

#[test]
fn cir_survival_matches_monte_carlo() {
    let grid = TimeGrid::new(0.0, 15.0, 0.05).unwrap();
    for model in [single(Dynamics::Cir, 0.0), two_pop(Dynamics::Cir, 0.0)] {
        let (mean, se) = monte_carlo(20_000, |p| vec![*simulate_path(&model, &grid, 8, p).survival.last().unwrap()]);
        let exact = survival_expectation(&coeffs(&model, 0.0, 15.0, &tol()).unwrap(), &model.initial_state());
        assert!((mean[0] - exact).abs() < 4.0 * se[0], "{:?}: {} vs {exact}", model.kind(), mean[0]);
    }
}

#[test]
fn tilde_mean_is_the_survival_weighted_hazard() {
    let grid = TimeGrid::new(0.0, 10.0, 0.05).unwrap();
    for (name, model) in all_models(0.0) {
        let j = model.members();
        let (mean, se) = monte_carlo(20_000, |p| {
            let path = simulate_path(&model, &grid, 17, p);
            let s = *path.survival.last().unwrap();
            vec![path.lambda.last().unwrap()[j] * s]
        });
        let lambda = model.initial_state();
        let h = survival_expectation(&coeffs(&model, 0.0, 10.0, &tol()).unwrap(), &lambda);
        let weighted = h * tilde_mean(&model, 0.0, 10.0, lambda, &tol()).unwrap()[j];
        assert!(
            (mean[0] - weighted).abs() < 4.0 * se[0] + 1e-3 * weighted.abs(),
            "{name}: {} vs {weighted}",
            mean[0]
        );
    }
}

/// `G` and its gradient by pointwise coefficients and adaptive quadrature.
fn pointwise_g(model: &MortalityModel, phi: f64, r: f64, t: f64, t_max: f64, lambda: [f64; 2]) -> (f64, [f64; 2]) {
    let j = model.members();
    let tol = Tolerance::new(1e-9, 25).unwrap();
    let piece = |s: f64, out: usize| -> f64 {
        let c = coeffs(model, t, s, &tol).unwrap();
        let (_, loading) = c.parts();
        let h = survival_expectation(&c, &lambda[..model.dim()]);
        let e = tilde_mean(model, t, s, lambda, &tol).unwrap()[j];
        let disc = (-r * (s - t)).exp();
        match out {
            0 => disc * h * (1.0 + phi * e),
            i => {
                // d(h E)/dλ_i = h (∂E/∂λ_i - C_i E); ∂E/∂λ_i by central differences.
                let i = i - 1;
                let eps = 1e-6;
                let (mut up, mut dn) = (lambda, lambda);
                up[i] += eps;
                dn[i] -= eps;
                let de = (tilde_mean(model, t, s, up, &tol).unwrap()[j] - tilde_mean(model, t, s, dn, &tol).unwrap()[j])
                    / (2.0 * eps);
                disc * h * (phi * de - loading[i] * (1.0 + phi * e))
            }
        }
    };
    let quad = Tolerance::new(1e-8, 20).unwrap();
    let g = integrate(|s| piece(s, 0), t, t_max, &quad).unwrap();
    let mut grad = [0.0; 2];
    for (i, gi) in grad.iter_mut().enumerate().take(model.dim()) {
        *gi = integrate(|s| piece(s, i + 1), t, t_max, &quad).unwrap();
    }
    (g, grad)
}

#[test]
fn lattice_annuity_matches_pointwise_quadrature() {
    for (name, model) in all_models(65.0) {
        for phi in [0.0, 0.8] {
            let kernel = AnnuityKernel::with_step(&model, phi, 0.04, 60.0, 0.05).unwrap();
            for t in [0.0, 13.3] {
                let lambda = model.initial_state();
                let (g, grad) = kernel.value_and_gradient(t, lambda).unwrap();
                let (g_ref, grad_ref) = pointwise_g(&model, phi, 0.04, t, 60.0, lambda);
                assert!((g / g_ref - 1.0).abs() < 1e-6, "{name} phi={phi} t={t}: {g} vs {g_ref}");
                for i in 0..model.dim() {
                    assert!(
                        (grad[i] - grad_ref[i]).abs() < 1e-4 * grad_ref[i].abs().max(1.0),
                        "{name} phi={phi} t={t} dG/dλ{}: {} vs {}",
                        i + 1,
                        grad[i],
                        grad_ref[i]
                    );
                }
            }
        }
    }
}

#[test]
fn zero_sharing_annuity_is_the_discounted_survival_integral() {
    let model = two_pop(Dynamics::Ou, 65.0);
    let lambda = model.initial_state();
    let g = AnnuityKernel::with_step(&model, 0.0, 0.04, 120.0, 0.05)
        .unwrap()
        .value(0.0, lambda)
        .unwrap();
    let reference = integrate(
        |s| (-0.04 * s).exp() * survival_expectation(&coeffs(&model, 0.0, s, &tol()).unwrap(), &lambda),
        0.0,
        120.0,
        &Tolerance::new(1e-10, 25).unwrap(),
    )
    .unwrap();
    assert!((g - reference).abs() < 1e-6 * reference, "{g} vs {reference}");
}

#[test]
fn truncation_horizon_is_immaterial() {
    for (name, model) in all_models(65.0) {
        let short = AnnuityKernel::with_step(&model, 0.8, 0.04, 120.0, 0.05).unwrap();
        let long = AnnuityKernel::with_step(&model, 0.8, 0.04, 200.0, 0.05).unwrap();
        for t in [0.0, 20.0, 35.0] {
            let lambda = [0.02, 0.02];
            let (a, b) = (short.value(t, lambda).unwrap(), long.value(t, lambda).unwrap());
            assert!(b.is_finite() && (a / b - 1.0).abs() < 1e-4, "{name} t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn gradient_signs() {
    for kind in [Dynamics::Ou, Dynamics::Cir] {
        let single_kernel = AnnuityKernel::with_step(&single(kind, 65.0), 0.8, 0.04, 120.0, 0.05).unwrap();
        let (_, g) = single_kernel.value_and_gradient(5.0, [0.015, 0.0]).unwrap();
        assert!(g[0] < 0.0, "{kind:?} single: {g:?}");

        // A higher reference hazard lowers the members' hazard through b21 > 0.
        let pair_kernel = AnnuityKernel::with_step(&two_pop(kind, 65.0), 0.8, 0.04, 120.0, 0.05).unwrap();
        let (_, g) = pair_kernel.value_and_gradient(5.0, [0.015, 0.015]).unwrap();
        assert!(g[1] < 0.0 && g[0] > 0.0, "{kind:?} sub-population: {g:?}");
    }
}

#[test]
fn death_density_peaks_in_the_early_eighties() {
    let cfg = table1_config();
    let grid = TimeGrid::new(0.0, 35.0, 0.1).unwrap();
    let paths = simulate_paths(&cfg.model, &grid, 500, 1).unwrap();
    let dist = death_time_distribution(&paths);
    let k = (0..dist.times.len())
        .max_by(|&a, &b| dist.mean_density[a].total_cmp(&dist.mean_density[b]))
        .unwrap();
    assert!((15.0..=25.0).contains(&dist.times[k]), "peak at {}", dist.times[k]);
    assert!(non_decreasing(&dist.mean_cdf));
}

#[test]
fn coefficient_dispatch_matches_variant() {
    let c = coeffs(&single(Dynamics::Cir, 0.0), 0.0, 3.0, &tol()).unwrap();
    assert!(matches!(c, AffineCoeffs::Single(_)));
    let c = coeffs(&two_pop(Dynamics::Cir, 0.0), 0.0, 3.0, &tol()).unwrap();
    assert!(matches!(c, AffineCoeffs::TwoPop(_)));
}
