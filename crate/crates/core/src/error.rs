use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("follow-on overflow: F = {0:e} exceeds the guard (γ≈1 on a continuing task?)")]
    FollowonOverflow(f64),

    #[error("episode exceeded the step cap of {0} steps")]
    StepCap(u64),

    #[error("singular system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("Markov chain is not irreducible: state {0} cannot reach every other state")]
    NotIrreducible(usize),

    #[error("expected-update averaging did not converge: standard error {achieved:e} > {target:e}")]
    NotConverged { achieved: f64, target: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

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

    #[error("malformed CSV {path}: {detail}")]
    MalformedCsv { path: PathBuf, detail: String },

    #[error("interrupted")]
    Interrupted,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems (bad keys, values, unreadable inputs) as opposed
    /// to faults raised while an experiment runs.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Io { .. }
                | Error::Csv { .. }
                | Error::MalformedCsv { .. }
                | Error::DimensionMismatch { .. }
                | Error::OutOfRange { .. }
        )
    }
}
