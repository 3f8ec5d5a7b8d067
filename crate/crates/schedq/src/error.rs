//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration violates one of its documented invariants.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A function argument is out of range or has the wrong shape.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An action was requested that the environment does not allow.
    #[error("illegal action: user {user} is not eligible ({reason})")]
    IllegalAction { user: usize, reason: String },

    /// No action can be taken because the state is terminal.
    #[error("no action available: state is terminal")]
    NoAction,

    /// The exhaustive oracle would exceed its node budget.
    #[error("oracle infeasible: {0}")]
    OracleInfeasible(String),

    /// The exhaustive oracle only supports static dynamics.
    #[error("unsupported config for oracle: {0}")]
    UnsupportedConfig(String),

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at iteration {iteration}: {detail}")]
    TrainingDiverged { iteration: usize, detail: String },

    /// A checkpoint or buffer file does not match its documented layout.
    #[error("bad file format in {path}: {detail}")]
    FileFormat { path: PathBuf, detail: String },

    /// The advantage metric is undefined (agent reward is zero).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// An error that occurred while running one collection episode.
    #[error("episode {index} failed: {source}")]
    Episode {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
