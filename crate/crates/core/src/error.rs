use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("coordinate {0} is not finite or lies outside the representable range")]
    CoordinateRange(f64),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("window mass must be finite and positive, got {0}")]
    WindowMass(String),
    #[error("measure has no exhaustion by finite-measure windows")]
    NoExhaustion,
    #[error("duplicate point in configuration: {0}")]
    DuplicatePoint(String),
    #[error("window is not contained in the configuration window")]
    WindowNotContained,
    #[error("preimage is not representable: {0}")]
    Unrepresentable(String),
    #[error("windows overlap")]
    OverlappingWindows,
    #[error("degenerate test input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tie between entries {0} and {1}")]
    Tie(usize, usize),
    #[error("oracle failed to produce a witness after {0} candidates")]
    NoWitness(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
