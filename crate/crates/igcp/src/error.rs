use thiserror::Error;

/// Errors raised by analytic evaluators, samplers and verification helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("result outside floating range: {0}")]
    Range(String),
    #[error("series did not converge after {terms} terms (partial sum {partial})")]
    Truncation { partial: f64, terms: usize },
    #[error("work budget exceeded: {needed} terms requested, limit {limit}")]
    Budget { needed: u64, limit: u64 },
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("degenerate test: {0}")]
    Degenerate(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("empty input")]
    Empty,
    #[error("sampler failed on stream {stream}: {message}")]
    Worker { stream: u64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
