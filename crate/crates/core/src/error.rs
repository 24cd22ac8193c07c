use thiserror::Error;

/// Errors raised by bellkit operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("visibility {0} is outside [0, 1]")]
    InvalidVisibility(f64),

    #[error("measurement direction ({0}, {1}, {2}) is not a unit vector")]
    NonUnitSetting(f64, f64, f64),

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid Bell expression: {0}")]
    InvalidExpression(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },

    #[error("correlation entry {value} at tuple {tuple:?} is outside [-1, 1]")]
    CorrelationOutOfRange { tuple: [usize; 3], value: f64 },

    #[error("{count} deterministic strategies exceed the enumeration cap of {cap}")]
    EnumerationCap { count: u128, cap: u64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
