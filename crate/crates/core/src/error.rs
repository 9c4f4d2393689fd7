use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("evaluation error at x={x}, t={t}: {reason}")]
    Evaluation { x: f64, t: f64, reason: String },

    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
