use thiserror::Error;

/// Errors produced anywhere in the modeling pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing single-core baseline for application '{application}' at {frequency_mhz} MHz")]
    MissingBaseline { application: String, frequency_mhz: u32 },

    #[error("non-positive execution time {time} in row {row}")]
    NonPositiveTime { row: usize, time: f64 },

    #[error("length mismatch: {left} predictions vs {right} observations")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("objective is non-finite at every initial annealer position")]
    NonFiniteObjective,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("too few samples: {samples} samples for {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },

    #[error("insufficient samples: training size {size} needs more than {available} samples")]
    InsufficientSamples { size: usize, available: usize },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("parse error at line {line}, field '{field}': {message}")]
    Parse { line: usize, field: String, message: String },

    #[error("schema error{}: {message}", row.map(|r| format!(" in row {r}")).unwrap_or_default())]
    Schema { row: Option<usize>, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn schema(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Schema { row, message: msg.into() }
    }

    /// Stable snake_case identifier for the variant, used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::MissingBaseline { .. } => "missing_baseline",
            Error::NonPositiveTime { .. } => "non_positive_time",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::NonFiniteObjective => "non_finite_objective",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SingularSystem => "singular_system",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::DivisionByZero(_) => "division_by_zero",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Serialization(_) => "serialization",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
