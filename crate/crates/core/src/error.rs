use thiserror::Error;

use crate::clustering::ClusterError;
use crate::dsp::DspError;
use crate::engine::RuleError;
use crate::io::FormatError;
use crate::scene::SceneError;
use crate::semantic::StoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for pipeline and CLI use.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Whether the failure stems from bad user input (as opposed to a
    /// pipeline-level failure). Drives the CLI exit code.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Scene(_) | Error::Format(_) | Error::Config(_) | Error::Rule(_) => true,
            Error::Io { .. } => true,
            Error::Store(e) => !matches!(e, StoreError::InvalidMap(_)),
            Error::Dsp(_) | Error::Cluster(_) => false,
        }
    }
}
