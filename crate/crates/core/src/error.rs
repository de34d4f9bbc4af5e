//! Error type shared across the calculus layers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalcError {
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(&'static str),
    #[error("unsupported root: {0}")]
    UnsupportedRoot(&'static str),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("incompatible expansion directions: {0}")]
    DirectionClash(String),
    #[error("window violation: {0}")]
    WindowViolation(String),
    #[error("expansion failure: {0}")]
    ExpansionFailure(String),
    #[error("syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdent(String),
    #[error("delta support: {0}")]
    DeltaSupport(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CalcError>;
