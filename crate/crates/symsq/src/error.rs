use thiserror::Error;

/// Errors raised by the library. Numerical failures that are expected during
/// verification (a residual above tolerance, a non-converging tail) are not
/// errors; they are reported through [`crate::report::VerificationReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: i64, modulus: u64 },

    #[error("factorization of {0} is not available; supply it explicitly")]
    FactorizationUnavailable(u64),

    #[error("index {n} shares a factor with the level {level}")]
    NotCoprimeToLevel { n: u64, level: u64 },

    #[error("index {n} outside the computed range 1..={len}")]
    OutOfRange { n: u64, len: usize },

    #[error("coefficient table has {available} entries, {required} are needed")]
    TruncationTooShort { required: usize, available: usize },

    #[error("pole of {function} at {at}")]
    Pole { function: &'static str, at: String },

    #[error("series has fractional exponent offset {0}/24")]
    FractionalExponent(i64),

    #[error("newform check failed: {0}")]
    NotANewform(String),

    #[error("no built-in newform for level {level} and weight {weight}")]
    UnknownForm { level: u64, weight: u32 },

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("data unavailable: {0}")]
    DataUnavailable(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
