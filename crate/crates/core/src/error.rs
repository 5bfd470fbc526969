use thiserror::Error;

/// Errors raised by the model, the closed forms and the enumeration kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("spin at index {index} is {value}, expected +1 or -1")]
    NotASpin { index: usize, value: i64 },

    #[error("{value} is not on the magnetization lattice of block size {block_size}")]
    OffLattice { value: f64, block_size: usize },

    #[error("magnetization {0} lies outside [-1, 1]")]
    OutOfRange(f64),

    #[error("{what} requires {condition}")]
    Domain {
        what: &'static str,
        condition: String,
    },

    #[error("enumeration needs {states} states, budget is {budget}")]
    BudgetExceeded { states: u128, budget: u128 },

    #[error("conditioning set is empty")]
    EmptyConditioning,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("conditioning acceptance rate {rate:.2e} is below {floor:.0e}")]
    LowAcceptance { rate: f64, floor: f64 },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
