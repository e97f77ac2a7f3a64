use clap::{Args, Parser, Subcommand};
use drawdown::experiments::{
    load_config, policy_csv, run_base, run_coeffs, run_compare, run_experiment, run_mortality, run_sweep,
    ExperimentConfig, ExperimentSummary, SweepSpec, SweepVar,
};
use drawdown::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Longevity-hedged income drawdown: mortality models, pricing coefficients,
/// optimal policies and scheme simulations.
#[derive(Parser, Debug)]
#[command(name = "drawdown", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed, overriding `scheme.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths, overriding `scheme.n_paths`.
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment named in the configuration.
    Run(Common),
    /// Simulate hazard paths and the death-time distribution.
    Mortality(Common),
    /// Tabulate survival coefficients for s = t, t + step, ..., s_max.
    Coeffs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Last maturity; defaults to the horizon.
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Print the optimal policy at one state as CSV.
    Policy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Reference hazard; defaults to its value at t = 0.
        #[arg(long)]
        lambda1: Option<f64>,
        /// Members' hazard for two-population models; defaults to its value at t = 0.
        #[arg(long)]
        lambda2: Option<f64>,
        /// Wealth; defaults to the initial wealth.
        #[arg(long)]
        wealth: Option<f64>,
    },
    /// Base scenario under the optimal policy.
    Simulate(Common),
    /// Optimal policy against the no-bond strategy.
    Compare(Common),
    /// Sensitivity sweep over theta1 or phi.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(paths) = common.paths {
        if paths == 0 {
            return Err(Error::Config("--paths must be at least 1".into()));
        }
        cfg.scenario.n_paths = paths;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<Option<ExperimentSummary>> {
    match command {
        Command::Run(c) => run_experiment(&load(&c)?).map(Some),
        Command::Mortality(c) => run_mortality(&load(&c)?).map(Some),
        Command::Simulate(c) => run_base(&load(&c)?).map(Some),
        Command::Compare(c) => run_compare(&load(&c)?).map(Some),
        Command::Coeffs { common, t, s_max, step } => {
            let cfg = load(&common)?;
            let s_max = s_max.unwrap_or(cfg.scenario.horizon);
            run_coeffs(&cfg, t, s_max, step).map(Some)
        }
        Command::Policy {
            common,
            t,
            lambda1,
            lambda2,
            wealth,
        } => {
            let cfg = load(&common)?;
            let start = cfg.model.initial_state();
            let lambda = [lambda1.unwrap_or(start[0]), lambda2.unwrap_or(start[1])];
            print!("{}", policy_csv(&cfg, t, lambda, wealth.unwrap_or(cfg.scenario.y0))?);
            Ok(None)
        }
        Command::Sweep { common, var, values } => {
            let cfg = load(&common)?;
            let var: Option<SweepVar> = var.map(|v| v.parse()).transpose()?;
            let spec = match (var, values, &cfg.sweep) {
                (Some(var), Some(values), _) => SweepSpec { var, values },
                (None, None, Some(spec)) => spec.clone(),
                (Some(var), None, Some(spec)) if spec.var == var => spec.clone(),
                _ => {
                    return Err(Error::Config(
                        "sweep needs --var and --values or a [sweep] section in the config".into(),
                    ))
                }
            };
            run_sweep(&cfg, &spec).map(Some)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(Some(summary)) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
