//! Scenario files, built-in networks, single runs and experiment matrices.

pub mod builtin;
pub mod config;
pub mod matrix;
pub mod runner;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::EngineError;
use crate::metrics::MetricsError;
use crate::network::NetworkError;
use crate::traffic::DemandError;

pub use builtin::{builtin_network, table3_scenario, Group, Role, DEFAULT_SEED};
pub use config::{load_scenario, DemandConfig, OutputConfig, ScenarioConfig, ScenarioSection};
pub use matrix::{
    compare, comparison_text, differential_delay, pct_change, run_matrix, Comparison, DecelRow,
    ExperimentMatrix, GroupComparison, MatrixEntry, RunDigest,
};
pub use runner::{run_scenario, write_outputs};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}{message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Toml { path: Option<PathBuf>, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("{}: {source}", path.display())]
    Network { path: PathBuf, source: NetworkError },
    #[error("demand{}: {source}", path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Demand {
        path: Option<PathBuf>,
        source: DemandError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("run {id}: {source}")]
    Run {
        id: String,
        source: Box<ScenarioError>,
    },
    #[error("matrix: {0}")]
    Matrix(String),
}

impl ScenarioError {
    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            ScenarioError::Toml { path: None, message } => ScenarioError::Toml {
                path: Some(path.to_path_buf()),
                message,
            },
            ScenarioError::Invalid { key, message } => ScenarioError::Invalid {
                key: format!("{}: {key}", path.display()),
                message,
            },
            other => other,
        }
    }
}
