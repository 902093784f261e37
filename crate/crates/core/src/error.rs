use thiserror::Error;

/// Errors raised by the estimation, sampling and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} outside admissible range {range}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("mask selects no components")]
    DegenerateMask,

    #[error("Newton iteration did not converge after {iterations} iterations (score norm {score_norm:e})")]
    NonConvergence {
        iterations: usize,
        score_norm: f64,
        last: Vec<f64>,
    },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("both conditional candidates have infinite objective")]
    DegenerateState,

    #[error("no recorded state has a finite objective")]
    NoValidState,

    #[error("{what} = {value} exceeds guard limit {limit}")]
    Guard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::ParameterDomain {
            name,
            value,
            range: range.into(),
        }
    }
}
