use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// The positive part of a residual has (numerically) no mass. Callers take
    /// their documented fallback branch on this error.
    #[error("degenerate residual: positive mass {mass:e} is below the clamp tolerance")]
    DegenerateResidual { mass: f64 },

    #[error("KL divergence undefined: q[{index}] = 0 but p[{index}] > 0")]
    SupportViolation { index: usize },

    #[error("insufficient samples for chi-square test: {0}")]
    InsufficientSamples(String),

    #[error("draft probability of proposed token {token} is zero")]
    ZeroDraftMass { token: usize },

    #[error("SFT draft probability of token {token} is zero")]
    ZeroSftMass { token: usize },

    #[error("reward/beta = {value} exceeds the exp overflow guard")]
    OverflowGuard { value: f64 },

    #[error("no feasible vertex: normalizer {normalizer} outside ({min_weight}, {max_weight})")]
    NoFeasibleVertex { normalizer: f64, min_weight: f64, max_weight: f64 },

    #[error("enumeration too large: {vocab}^{length} sequences exceeds the limit")]
    EnumerationTooLarge { vocab: usize, length: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("invalid config key `{key}`: {reason}")]
    ConfigInvalid { key: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid { key: key.into(), reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
