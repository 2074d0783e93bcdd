//! Multi-trial experiments: configuration, parallel execution, aggregation,
//! tuning sweeps, output files and the interactive session.

mod aggregate;
mod config;
mod interactive;
mod output;
mod problem;
mod svg;
mod tune;

use thiserror::Error;

pub use aggregate::{
    run_experiment, run_method_trial, AggregateResult, MethodAggregate, MetricSeries, Provenance,
    TrialSummary,
};
pub use config::{
    ExperimentConfig, MethodConfig, ProblemConfig, SyntheticProblem, DEFAULT_OPTIMIZER_T,
};
pub use interactive::{interactive_session, SessionOutcome};
pub use output::{emit_outputs, format_csv_value, method_csv};
pub use problem::Problem;
pub use tune::{
    select_best, sweep_tuning, TunedCell, TuningResult, DEFAULT_DELTA_GRID, DEFAULT_ETA_GRID,
    TUNING_TRIALS,
};

use crate::diagnostics::DiagnosticsError;
use crate::lqg::LqgError;
use crate::optimizer::OptimizerError;
use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lqg(#[from] LqgError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("every trial of method {method} diverged")]
    AllDiverged { method: String },
    #[error("tuning failed: {0}")]
    Tuning(String),
}
