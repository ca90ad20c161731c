use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {level} exceeds the dense materialization cap {cap}")]
    SizeCap { level: u32, cap: u32 },

    #[error("dimension {dim} exceeds the dense solver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid level {0}: must be at least 1")]
    InvalidLevel(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: u32, found: u32 },

    #[error("operation requires a dyadic truncation")]
    NotDyadic,

    #[error("({level}, {prefix}) is not a node of the truncation")]
    NotANode { level: u32, prefix: usize },

    #[error("node at level {level} is not at the deepest node level {deepest}")]
    NotDeepestNode { level: u32, deepest: u32 },

    #[error("alpha^2 + beta^2 = {0} exceeds 1")]
    OutsideDomain(f64),

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
