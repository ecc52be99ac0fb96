use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The small-interval approximation behind the photon-number model does not hold.
    #[error("model validity: {0}")]
    ModelValidity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no three-level rate set reproduces beta = {requested_beta}{}", nearest_hint(*.nearest_beta))]
    CalibrationInfeasible {
        requested_beta: f64,
        nearest_beta: Option<f64>,
    },

    #[error("timestamps not sorted at index {index}: {previous} > {current}")]
    UnsortedStream {
        index: usize,
        previous: u64,
        current: u64,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("fit failed for every emitter count: {0}")]
    Fit(String),

    #[error("{location}: {message}")]
    Config { location: String, message: String },

    #[error("malformed {kind} data: {message}")]
    Format { kind: &'static str, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn nearest_hint(nearest: Option<f64>) -> String {
    match nearest {
        Some(b) => format!(" (nearest achievable beta: {b:.6})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: message.into(),
        }
    }
}
