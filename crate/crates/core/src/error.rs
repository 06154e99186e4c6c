use std::fmt;

use thiserror::Error;

use crate::mixture::CovarianceFamily;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One failed cell of a model-selection grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FitFailure {
    pub n_components: usize,
    pub family: CovarianceFamily,
    pub reason: String,
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G={} {}: {}", self.n_components, self.family, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("component {component} collapsed: {reason}")]
    ComponentCollapse { component: usize, reason: String },

    #[error("no model could be fitted ({})", join_failures(.0))]
    NoModel(Vec<FitFailure>),

    #[error("algorithm fault: {0}")]
    AlgorithmFault(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input or usage).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateModel(_)
                | Error::ComponentCollapse { .. }
                | Error::NoModel(_)
                | Error::AlgorithmFault(_)
        )
    }
}

fn join_failures(failures: &[FitFailure]) -> String {
    failures
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
