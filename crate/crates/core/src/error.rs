use thiserror::Error;

/// Errors raised by the simulation, extraction and classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid time step {0}; must be finite")]
    InvalidTimeStep(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("design matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("invalid matrix shape: {0}")]
    Shape(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid pulse specification: {0}")]
    InvalidPulse(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("operator is not a valid noise operator: {0}")]
    InvalidOperator(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed CSV at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
