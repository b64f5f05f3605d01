//! Experiment orchestration: configuration, the four studies and their CSV
//! output.
//!
//! All randomness descends from the configured master seed through
//! [`crate::seed`], addressed by study label and grid indices, so results
//! do not depend on thread scheduling and identical configurations produce
//! byte-identical CSV files.

mod config;
mod studies;

pub use config::{
    BerConfig, BootstrapLevel, ExperimentConfig, LatencyConfig, Overrides, PowerConfig, SensitivityConfig, SnrMode,
};
pub use studies::{
    render_csv, run_all, run_ber_study, run_study, run_latency_study, run_power_study, run_sensitivity_study, BerRow, BerStudy,
    LatencyRow, PowerRow, SensitivityRow, Study,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Latency(#[from] crate::frame_latency::LatencyError),
    #[error(transparent)]
    Phy(#[from] crate::phy::PhyError),
    #[error(transparent)]
    Sandbox(#[from] crate::sandbox::SandboxError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    LinkBudget(#[from] crate::linkbudget::LinkBudgetError),
    #[error("study failed: {0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, RunnerError>;
