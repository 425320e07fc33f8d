//! Experiment runner: seeds, run filtering, metrics, and output files.

use std::path::PathBuf;

use thiserror::Error;

use crate::agent::AgentError;
use crate::config::ConfigError;

pub mod experiment;
pub mod metrics;
pub mod output;

pub use experiment::{
    run_experiment, run_sweep, summary_table, ExperimentResult, RunOptions, SweepResult,
};
pub use metrics::{compute_metrics, filter_valid_run, Aggregate, MeanSem, RunSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("only {valid} of {requested} runs passed the filter after {attempts} seeds")]
    FilterExhausted {
        valid: usize,
        requested: usize,
        attempts: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl HarnessError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::FilterExhausted { .. } => 3,
            HarnessError::Io { .. } | HarnessError::Csv { .. } | HarnessError::Json { .. } => 4,
            HarnessError::Agent(AgentError::Config(_)) => 2,
            HarnessError::Agent(_) | HarnessError::Pool(_) => 1,
        }
    }
}
