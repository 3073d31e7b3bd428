use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The leading term of a result cannot be certified within the current
    /// truncation horizon. Callers may retry with a larger precision.
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("malformed tower step {index}: {reason}")]
    MalformedStep { index: usize, reason: String },

    #[error("unsupported probe: {0}")]
    UnsupportedProbe(String),

    #[error("refined Swan conductor undefined: Swan conductor is zero")]
    ZeroConductor,

    #[error("trivial class in the filtration quotient")]
    TrivialClass,

    #[error("zero differential")]
    ZeroDifferential,

    #[error("function is not bijective")]
    NotBijective,

    #[error("malformed parameters: {0}")]
    MalformedParams(String),

    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("exact best-representative reduction is not implemented for Witt length {0}")]
    NotImplementedExact(usize),

    #[error("unsupported tower: {0}")]
    UnsupportedTower(String),

    #[error("boundary case of the degree-p conductor formula: {0}")]
    BoundaryCase(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
