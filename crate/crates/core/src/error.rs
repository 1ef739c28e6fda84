use thiserror::Error;

/// Errors raised by the model, sampler, decision rules and file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Data violate a structural invariant (e.g. more DLTs than subjects).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Configuration is inconsistent or violates a type invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was called on a trial in the wrong state.
    #[error("invalid state: {0}")]
    State(String),

    /// No beta distribution can match the requested moments.
    #[error("infeasible moments: sd^2 = {variance:.6} must be below mean*(1-mean) = {bound:.6}")]
    Infeasible { variance: f64, bound: f64 },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// A simulation replicate failed; carries the replicate index.
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
