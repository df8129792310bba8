use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty batch")]
    EmptyBatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for K = {k}")]
    InvalidLabel { label: usize, k: usize },

    #[error("non-finite objective {value} at iteration {iteration} (lambda = {lambda})")]
    NonFinite {
        iteration: usize,
        value: f64,
        lambda: f64,
    },

    #[error("class {class} has {count} examples, cannot split into {folds} stratified folds")]
    Stratification {
        class: usize,
        count: usize,
        folds: usize,
    },

    #[error("degenerate RSS distribution: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Core(#[from] nilab_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
