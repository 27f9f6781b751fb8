use thiserror::Error;

/// Errors raised by the splitting library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must have at least one coordinate")]
    EmptyVector,

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("step size {lambda} outside admissible range ({lower}, {upper}]{}", index_suffix(*.index))]
    StepOutOfRange {
        lambda: f64,
        lower: f64,
        upper: f64,
        index: Option<usize>,
    },

    #[error("point lies outside the domain of the operator")]
    OutsideDomain,

    #[error("vector is not in the image of the operator (gap {gap:e})")]
    NotInImage { gap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schedule is not square-summable")]
    NotSquareSummable,

    #[error("time {t} lies beyond the reachable horizon {horizon} of the schedule")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("schedule index {index} is beyond its length {len}")]
    ScheduleExhausted { index: usize, len: usize },

    #[error("iteration budget exhausted: {required} steps required, {budget} allowed")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("{m} steps give a step above the admissible limit; at least {minimal} are needed")]
    TooFewSteps { m: usize, minimal: usize },

    #[error("{0}")]
    Io(String),
}

fn index_suffix(index: Option<usize>) -> String {
    match index {
        Some(k) => format!(" at index {k}"),
        None => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
