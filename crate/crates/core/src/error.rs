use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset needs at least 2 observations, got {0}")]
    TooFewObservations(usize),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("event indicator at row {row} is {value}, expected 0 or 1")]
    InvalidEvent { row: usize, value: f64 },

    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: &'static str, row: usize },

    #[error(
        "censoring survivor is zero on the interval starting at {at}; synthetic response undefined"
    )]
    ZeroSurvivor { at: f64 },

    #[error("column {0} is constant after centering")]
    ConstantColumn(usize),

    #[error("linear solve failed (lambda = {lambda}): system is not positive definite")]
    SolveFailed { lambda: f64 },

    #[error("non-finite coefficient at index {0}")]
    NonFiniteCoefficient(usize),

    #[error("degenerate tuning grid: upper bound {upper} does not exceed lower bound {lower}")]
    DegenerateGrid { lower: f64, upper: f64 },

    #[error("invalid fold count {k} for {n} observations")]
    InvalidFolds { n: usize, k: usize },

    #[error("cross-validation failed in every grid cell")]
    CrossValidationFailed,

    #[error("invalid penalty parameter: {0}")]
    InvalidPenalty(String),

    #[error("screening size {k} out of range 1..={p}")]
    InvalidScreenSize { k: usize, p: usize },

    #[error("lambda must be positive for the grouping bound")]
    ZeroLambda,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("censoring calibration failed: {0}")]
    Calibration(String),
}
