use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Scenario that cannot be run as specified (e.g. tau < K+1).
    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    /// Matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Pilot matrix fails the contamination-avoidance conditions.
    #[error("invalid pilot matrix: {0}")]
    InvalidPilot(String),

    /// Singular or numerically rank-deficient matrix.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Malformed input data (CSV/JSON).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
