use thiserror::Error;

/// Errors raised while building problems, solving them, or moving data in and out.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid group partition: {0}")]
    InvalidPartition(String),

    #[error("unknown group index {0}")]
    UnknownGroup(usize),

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dual point outside the conjugate domain (violation {violation:e})")]
    InfeasibleDual { violation: f64 },

    #[error("degenerate problem: lambda_max is zero")]
    DegenerateProblem,

    #[error("unsupported rule: {0}")]
    UnsupportedRule(String),

    #[error("solver diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
