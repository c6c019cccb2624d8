use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at {context}")]
    NonFinite { context: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("mass imbalance between source ({source_mass}) and target ({target_mass})")]
    MassImbalance { source_mass: f64, target_mass: f64 },

    #[error(
        "Sinkhorn scaling underflowed at regularization {reg}; use a larger --sinkhorn-reg"
    )]
    SinkhornUnderflow { reg: f64 },

    #[error("network simplex exceeded {limit} pivots")]
    PivotLimit { limit: usize },

    #[error("solver failed on pair ({i}, {j}) at iteration {iteration}: {source}")]
    PairFailed {
        iteration: usize,
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("space violates metric-measure invariants: {0}")]
    InvalidSpace(String),

    #[error("support of size {size} exceeds the brute-force limit of {limit}; use the Wasserstein-based bound checks instead")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
