use super::config::{ExperimentConfig, ExperimentKind, SweepSpec, SweepVar};
use super::csv::{numeric_rows, write_csv, Cell};
use crate::affine::{coeffs, rolling_bond_volatility, AffineCoeffs};
use crate::control::{PolicyEngine, SchemeScenario};
use crate::error::{Error, Result};
use crate::mortality::{death_time_distribution, simulate_paths, MortalityPaths};
use crate::scheme::{compare_strategies, discounted_totals, simulate_scheme, Arm, ComparisonReport, PolicyKind, SchemeTrajectory};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Paths shown individually in per-path CSV columns.
const SHOWN_PATHS: usize = 3;

/// Files written by an experiment and a human-readable report.
#[derive(Debug, Clone, Default)]
pub struct ExperimentSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

impl ExperimentSummary {
    fn push(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// Runs the experiment selected in the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    match cfg.experiment {
        ExperimentKind::Base => run_base(cfg),
        ExperimentKind::Compare => run_compare(cfg),
        ExperimentKind::Sweep => {
            let spec = cfg
                .sweep
                .clone()
                .ok_or_else(|| Error::config("sweep experiment without a [sweep] section"))?;
            run_sweep(cfg, &spec)
        }
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut summary = ExperimentSummary::default();
    summary.push(format!(
        "model {} | seed {} | paths {} | horizon {} | dt {}",
        cfg.selection, cfg.scenario.seed, cfg.scenario.n_paths, cfg.scenario.horizon, cfg.scenario.dt
    ));
    Ok(summary)
}

fn simulate_mortality(cfg: &ExperimentConfig) -> Result<MortalityPaths> {
    let grid = cfg.scenario.grid()?;
    simulate_paths(&cfg.model, &grid, cfg.scenario.n_paths, cfg.scenario.seed)
}

fn shown<T>(series: &[T]) -> usize {
    series.len().min(SHOWN_PATHS)
}

fn per_path_headers(prefix: &str) -> Vec<String> {
    (1..=SHOWN_PATHS).map(|i| format!("{prefix}_p{i}")).collect()
}

fn per_path_cells(series: &[Vec<f64>], k: usize) -> Vec<Cell> {
    (0..SHOWN_PATHS)
        .map(|p| series.get(p).map_or(Cell::Empty, |s| Cell::Num(s[k])))
        .collect()
}

fn write(summary: &mut ExperimentSummary, path: PathBuf, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&path, &header, rows)?;
    summary.files.push(path);
    Ok(())
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Death-time CSV: survival of the first paths, mean survival, CDF and density.
fn write_death_time(summary: &mut ExperimentSummary, dir: &Path, paths: &MortalityPaths) -> Result<()> {
    let dist = death_time_distribution(paths);
    let survival: Vec<Vec<f64>> = (0..shown(&dist.cdf)).map(|p| paths.survival(p).to_vec()).collect();
    let mean_survival: Vec<f64> = dist.mean_cdf.iter().map(|f| 1.0 - f).collect();
    let mut header = vec!["time".to_string()];
    header.extend(per_path_headers("survival"));
    header.extend(strings(&["mean_survival", "mean_cdf", "mean_density"]));
    let rows: Vec<Vec<Cell>> = (0..dist.times.len())
        .map(|k| {
            let mut row = vec![Cell::Num(dist.times[k])];
            row.extend(per_path_cells(&survival, k));
            row.extend([
                Cell::Num(mean_survival[k]),
                Cell::Num(dist.mean_cdf[k]),
                Cell::Num(dist.mean_density[k]),
            ]);
            row
        })
        .collect();
    write(summary, dir.join("death_time.csv"), &header, &rows)
}

fn trajectory_rows(traj: &SchemeTrajectory) -> (Vec<String>, Vec<Vec<Cell>>) {
    let header = strings(&[
        "time",
        "mean_wealth",
        "mean_withdraw",
        "mean_compensation",
        "w_stock",
        "w_bond",
        "w_cash",
        "mean_survival",
        "mean_withdraw_fraction",
    ]);
    let weights = traj.mean_weights();
    let (w_stock, w_bond, w_cash): (Vec<f64>, Vec<f64>, Vec<f64>) = (
        weights.iter().map(|w| w[0]).collect(),
        weights.iter().map(|w| w[1]).collect(),
        weights.iter().map(|w| w[2]).collect(),
    );
    let rows = numeric_rows(&[
        traj.grid.nodes(),
        &traj.mean_wealth(),
        &traj.mean_withdraw(),
        &traj.mean_compensation(),
        &w_stock,
        &w_bond,
        &w_cash,
        &traj.mean_survival(),
        &traj.mean_withdraw_fraction(),
    ]);
    (header, rows)
}

fn write_trajectory(summary: &mut ExperimentSummary, path: PathBuf, traj: &SchemeTrajectory) -> Result<()> {
    let (header, rows) = trajectory_rows(traj);
    write(summary, path, &header, &rows)
}

fn write_weights(summary: &mut ExperimentSummary, path: PathBuf, traj: &SchemeTrajectory) -> Result<()> {
    let weights = traj.mean_weights();
    let bond: Vec<Vec<f64>> = traj
        .weights
        .iter()
        .take(SHOWN_PATHS)
        .map(|w| w.iter().map(|w| w[1]).collect())
        .collect();
    let mut header = strings(&["time", "w_stock", "w_bond", "w_cash"]);
    header.extend(per_path_headers("w_bond"));
    let rows: Vec<Vec<Cell>> = traj
        .grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut row = vec![
                Cell::Num(t),
                Cell::Num(weights[k][0]),
                Cell::Num(weights[k][1]),
                Cell::Num(weights[k][2]),
            ];
            row.extend(per_path_cells(&bond, k));
            row
        })
        .collect();
    write(summary, path, &header, &rows)
}

/// Base scenario: death-time distribution, optimal weights and the wealth,
/// withdrawal and compensation averages.
pub fn run_base(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let mut summary = prepare(cfg)?;
    let start = Instant::now();
    let paths = simulate_mortality(cfg).map_err(|e| e.in_context("base experiment"))?;
    write_death_time(&mut summary, &cfg.out_dir, &paths)?;
    let traj = simulate_scheme(&cfg.model, &cfg.scenario, &cfg.market, &PolicyKind::Optimal, &paths)
        .map_err(|e| e.in_context("base experiment"))?;
    write_weights(&mut summary, cfg.out_dir.join("weights.csv"), &traj)?;
    write_trajectory(&mut summary, cfg.out_dir.join("trajectory.csv"), &traj)?;

    let totals = discounted_totals(&traj, cfg.market.r);
    summary.push(format!(
        "discounted benefit {:.6} | discounted compensation {:.6}",
        totals.mean_benefit, totals.mean_compensation
    ));
    summary.push(format!("floor hits {}", traj.floor_hits()));
    summary.push(format!("runtime {:.3} s", start.elapsed().as_secs_f64()));
    Ok(summary)
}

fn write_comparison(summary: &mut ExperimentSummary, path: PathBuf, rep: &ComparisonReport) -> Result<()> {
    let header = strings(&[
        "time",
        "mean_withdraw_a",
        "mean_withdraw_b",
        "mean_compensation_a",
        "mean_compensation_b",
        "improvement_withdraw",
        "improvement_compensation",
        "relative_improvement_withdraw",
        "relative_improvement_compensation",
    ]);
    let rows = numeric_rows(&[
        &rep.times,
        &rep.trajectory_a.mean_withdraw(),
        &rep.trajectory_b.mean_withdraw(),
        &rep.trajectory_a.mean_compensation(),
        &rep.trajectory_b.mean_compensation(),
        &rep.mean_delta_withdraw,
        &rep.mean_delta_compensation,
        &rep.relative_withdraw,
        &rep.relative_compensation,
    ]);
    write(summary, path, &header, &rows)
}

fn write_improvement_paths(summary: &mut ExperimentSummary, path: PathBuf, rep: &ComparisonReport) -> Result<()> {
    let mut header = vec!["time".to_string()];
    header.extend(per_path_headers("improvement_withdraw"));
    header.extend(per_path_headers("improvement_compensation"));
    let rows: Vec<Vec<Cell>> = rep
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut row = vec![Cell::Num(t)];
            row.extend(per_path_cells(&rep.delta_withdraw, k));
            row.extend(per_path_cells(&rep.delta_compensation, k));
            row
        })
        .collect();
    write(summary, path, &header, &rows)
}

fn report_lines(summary: &mut ExperimentSummary, label: &str, rep: &ComparisonReport) {
    summary.push(format!(
        "{label}: discounted benefit {:.6} -> {:.6} ({:+.4}%), compensation {:.6} -> {:.6} ({:+.4}%)",
        rep.totals_a.mean_benefit,
        rep.totals_b.mean_benefit,
        100.0 * rep.benefit_improvement(),
        rep.totals_a.mean_compensation,
        rep.totals_b.mean_compensation,
        100.0 * rep.compensation_improvement(),
    ));
    summary.push(format!(
        "{label}: floor hits {} / {}",
        rep.trajectory_a.floor_hits(),
        rep.trajectory_b.floor_hits()
    ));
}

/// Hedging comparison: no-bond strategy (arm A) against the optimal one (arm B).
pub fn run_compare(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let mut summary = prepare(cfg)?;
    let start = Instant::now();
    let arm = |policy| Arm {
        policy,
        scenario: cfg.scenario,
        market: cfg.market,
    };
    let rep = compare_strategies(&cfg.model, &arm(PolicyKind::NoBond), &arm(PolicyKind::Optimal))
        .map_err(|e| e.in_context("compare experiment"))?;
    write_comparison(&mut summary, cfg.out_dir.join("comparison.csv"), &rep)?;
    write_improvement_paths(&mut summary, cfg.out_dir.join("improvement_paths.csv"), &rep)?;
    write_trajectory(&mut summary, cfg.out_dir.join("trajectory_a.csv"), &rep.trajectory_a)?;
    write_trajectory(&mut summary, cfg.out_dir.join("trajectory_b.csv"), &rep.trajectory_b)?;
    report_lines(&mut summary, "no bond -> optimal", &rep);
    summary.push(format!("runtime {:.3} s", start.elapsed().as_secs_f64()));
    Ok(summary)
}

/// The two arms compared at one sweep point.
///
/// For `theta1` the no-bond strategy at the same `θ_1` is the reference; for
/// `phi` the reference is the optimal strategy with `φ = 0`.
pub fn sweep_arms(cfg: &ExperimentConfig, var: SweepVar, value: f64) -> (Arm, Arm) {
    match var {
        SweepVar::Theta1 => {
            let market = crate::affine::MarketParams {
                theta1: value,
                ..cfg.market
            };
            (
                Arm {
                    policy: PolicyKind::NoBond,
                    scenario: cfg.scenario,
                    market,
                },
                Arm {
                    policy: PolicyKind::Optimal,
                    scenario: cfg.scenario,
                    market,
                },
            )
        }
        SweepVar::Phi => (
            Arm {
                policy: PolicyKind::Optimal,
                scenario: SchemeScenario { phi: 0.0, ..cfg.scenario },
                market: cfg.market,
            },
            Arm {
                policy: PolicyKind::Optimal,
                scenario: SchemeScenario { phi: value, ..cfg.scenario },
                market: cfg.market,
            },
        ),
    }
}

/// Sensitivity sweep over `θ_1` or `φ`.
pub fn run_sweep(cfg: &ExperimentConfig, spec: &SweepSpec) -> Result<ExperimentSummary> {
    if spec.values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let mut summary = prepare(cfg)?;
    let start = Instant::now();
    let var = spec.var.name();
    let mut summary_rows = Vec::new();
    for (i, &value) in spec.values.iter().enumerate() {
        let (a, b) = sweep_arms(cfg, spec.var, value);
        let rep = compare_strategies(&cfg.model, &a, &b)
            .map_err(|e| e.in_context(&format!("sweep {var} = {value}")))?;

        let weights = rep.trajectory_b.mean_weights();
        let header = strings(&[
            "time",
            "w_stock",
            "w_bond",
            "w_cash",
            "improvement_withdraw",
            "improvement_compensation",
            "relative_improvement_withdraw",
            "relative_improvement_compensation",
        ]);
        let rows: Vec<Vec<Cell>> = rep
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                [
                    t,
                    weights[k][0],
                    weights[k][1],
                    weights[k][2],
                    rep.mean_delta_withdraw[k],
                    rep.mean_delta_compensation[k],
                    rep.relative_withdraw[k],
                    rep.relative_compensation[k],
                ]
                .into_iter()
                .map(Cell::Num)
                .collect()
            })
            .collect();
        write(&mut summary, cfg.out_dir.join(format!("sweep_{var}_{i}.csv")), &header, &rows)?;
        report_lines(&mut summary, &format!("{var} = {value}"), &rep);
        summary_rows.push(vec![
            Cell::Num(value),
            Cell::Num(weights[0][1]),
            Cell::Num(rep.totals_a.mean_benefit),
            Cell::Num(rep.totals_b.mean_benefit),
            Cell::Num(rep.totals_a.mean_compensation),
            Cell::Num(rep.totals_b.mean_compensation),
            Cell::Num(rep.benefit_improvement()),
            Cell::Num(rep.compensation_improvement()),
            Cell::from(rep.trajectory_a.floor_hits() + rep.trajectory_b.floor_hits()),
        ]);
    }
    let header = strings(&[
        var,
        "w_bond_t0",
        "discounted_benefit_ref",
        "discounted_benefit",
        "discounted_compensation_ref",
        "discounted_compensation",
        "benefit_improvement",
        "compensation_improvement",
        "floor_hits",
    ]);
    write(
        &mut summary,
        cfg.out_dir.join(format!("sweep_{var}_summary.csv")),
        &header,
        &summary_rows,
    )?;
    summary.push(format!("runtime {:.3} s", start.elapsed().as_secs_f64()));
    Ok(summary)
}

/// Mortality paths in long format plus the death-time distribution.
pub fn run_mortality(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let mut summary = prepare(cfg)?;
    let paths = simulate_mortality(cfg)?;
    let times = paths.grid().nodes();
    let mut rows = Vec::with_capacity(paths.n_paths() * times.len());
    for p in 0..paths.n_paths() {
        for (k, &t) in times.iter().enumerate() {
            rows.push(vec![
                Cell::Num(t),
                Cell::from(p),
                Cell::Num(paths.lambda1(p)[k]),
                Cell::from(paths.lambda2(p).map(|l| l[k])),
                Cell::Num(paths.survival(p)[k]),
            ]);
        }
    }
    let header = strings(&["time", "path_id", "lambda1", "lambda2", "survival"]);
    write(&mut summary, cfg.out_dir.join("mortality_paths.csv"), &header, &rows)?;
    write_death_time(&mut summary, &cfg.out_dir, &paths)?;
    Ok(summary)
}

/// Survival coefficients for `s = t, t + step, ..., s_max`.
pub fn run_coeffs(cfg: &ExperimentConfig, t: f64, s_max: f64, step: f64) -> Result<ExperimentSummary> {
    if !(step > 0.0) || !(s_max >= t) {
        return Err(Error::config(format!(
            "coefficient grid needs step > 0 and s_max >= t (t = {t}, s_max = {s_max}, step = {step})"
        )));
    }
    let mut summary = prepare(cfg)?;
    let n = ((s_max - t) / step + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = t + k as f64 * step;
        let c = coeffs(&cfg.model, t, s, &cfg.scenario.tol)?;
        let row = match c {
            AffineCoeffs::Single(c) => vec![Cell::Num(t), Cell::Num(s), Cell::Num(c.a0), Cell::Num(c.a1), Cell::Empty],
            AffineCoeffs::TwoPop(c) => vec![Cell::Num(t), Cell::Num(s), Cell::Num(c.c0), Cell::Num(c.c1), Cell::Num(c.c2)],
        };
        rows.push(row);
    }
    let header = strings(&["t", "s", "A0_or_C0", "A1_or_C1", "C2"]);
    write(&mut summary, cfg.out_dir.join("coeffs.csv"), &header, &rows)?;
    Ok(summary)
}

/// Optimal policy at one state, as a CSV header and row.
pub fn policy_csv(cfg: &ExperimentConfig, t: f64, lambda: [f64; 2], wealth: f64) -> Result<String> {
    let engine = PolicyEngine::new(&cfg.model, &cfg.scenario, &cfg.market)?;
    let d = engine.optimal(t, lambda, wealth)?;
    let g = engine.kernel().value(t, lambda)?;
    let sigma_l = rolling_bond_volatility(&cfg.model, &cfg.market, t, lambda[0])?;
    let header = [
        "t",
        "lambda1",
        "lambda2",
        "wealth",
        "withdraw_rate",
        "stock_weight",
        "bond_weight",
        "cash_weight",
        "G",
        "sigma_L",
    ];
    let lambda2 = if cfg.model.dim() == 2 { Cell::Num(lambda[1]) } else { Cell::Empty };
    let row = vec![
        Cell::Num(t),
        Cell::Num(lambda[0]),
        lambda2,
        Cell::Num(wealth),
        Cell::Num(d.withdraw_rate),
        Cell::Num(d.stock_weight),
        Cell::Num(d.bond_weight),
        Cell::Num(d.cash_weight),
        Cell::Num(g),
        Cell::Num(sigma_l),
    ];
    Ok(super::csv::render_csv(&header, &[row]))
}
