use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::config::{ConfigError, ExperimentKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config {}: {source}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },

    #[error("unknown scenario `{0}` (see `tslab scenarios`)")]
    UnknownScenario(String),

    #[error("{kind} experiment failed: {source}")]
    Experiment {
        kind: ExperimentKind,
        #[source]
        source: tslab_core::Error,
    },

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    /// Process exit status: 2 for bad configuration, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::UnknownScenario(_) => 2,
            RunError::Experiment { source, .. } if source.is_numeric() => 3,
            RunError::Experiment {
                source: tslab_core::Error::Domain(_),
                ..
            } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }
}
