use thiserror::Error;

/// Errors raised across the modulation, bound and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("conjugation table violates its constraints at index {index}: {reason}")]
    ConstraintViolation { index: usize, reason: String },

    #[error("argument {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("non-finite input at position {0}")]
    NonFinite(usize),

    #[error("bias {beta} is not strictly inside the linear range ({lo}, {hi})")]
    BiasOutOfRange { beta: f64, lo: f64, hi: f64 },

    #[error("closed-form Bussgang statistics need a symmetric nonlinearity; use the numeric route")]
    Asymmetric,

    #[error("target BER {target:e} is not reached by the simulated curve (floor {floor:e})")]
    UnreachableTarget { target: f64, floor: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
