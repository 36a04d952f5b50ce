use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (non-finite latent
    /// score, non-positive scale, category out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The model or run configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The operation does not apply to this kind of model.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Every jittered starting point produced a non-finite log density.
    #[error("sampler initialization failed after {attempts} attempts (chain {chain})")]
    Initialization { chain: usize, attempts: usize },

    /// The log density evaluated to a non-finite value.
    #[error("non-finite log density")]
    NonFinite,
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
