//! Configuration, experiment runners and CSV output for the command line.

pub mod config;
pub mod csv;
mod run;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind, ModelSelection, SweepSpec, SweepVar};
pub use run::{
    policy_csv, run_base, run_coeffs, run_compare, run_experiment, run_mortality, run_sweep, sweep_arms,
    ExperimentSummary,
};
