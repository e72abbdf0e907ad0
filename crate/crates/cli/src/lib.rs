//! Experiment runner: TOML configs, seeded Monte Carlo over the core models,
//! CSV and gnuplot output.

pub mod config;
pub mod experiment;
pub mod table;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiment::{run_experiment, Outcome, RunError, RunOptions};
pub use table::{emit_plot_data, load_csv, Format, Row, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Process exit code for a failed run.
pub fn exit_code(err: &RunError) -> i32 {
    match err {
        RunError::Core(backhaul_core::Error::Parameter { .. }) => EXIT_CONFIG,
        RunError::Core(backhaul_core::Error::Infeasible { .. }) => EXIT_INFEASIBLE,
        RunError::Core(backhaul_core::Error::Numerical(_)) => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}
