//! Experiment engine and command line: demonstrations, fits, exact losses and
//! episode-count sweeps written as CSV.

mod cli;
mod config;
mod sweep;

pub use cli::run;
pub use config::{DemoOpponent, ExperimentConfig, ModelName};
pub use sweep::{
    derive_seed, eval_mode_name, generate_demos, run_sweep, summarize, write_results_csv,
    write_summary_csv, write_sweep, Experiment, ResultRow, Scored, SummaryRow, RESULT_COLUMNS,
};
