use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing parameters (grid, pulse, schedule, config files).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition (length mismatch, t < t0, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("propagation diverged at t = {t}: {reason}")]
    PropagationDiverged { t: f64, reason: String },

    #[error("integration diverged at t = {t}")]
    IntegrationDiverged { t: f64 },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },

    #[error("degenerate state: density below floor on {fraction:.1}% of nodes")]
    DegenerateState { fraction: f64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }
}
