use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{op}: domain error: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A computation produced a value that is impossible analytically
    /// (non-positive variance, cancelled normalization, ...).
    #[error("{op}: numerical failure: {msg}")]
    Numerical { op: &'static str, msg: String },

    /// An iterative procedure hit its cap before meeting its tolerance.
    #[error("{op}: no convergence after {iterations} iterations (partial {partial:e}, bound {bound:e})")]
    NoConvergence { op: &'static str, iterations: usize, partial: f64, bound: f64 },

    /// The request is valid but outside what this library implements.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn numerical(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Numerical { op, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
