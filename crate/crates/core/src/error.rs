use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("full gradient requested without diagnostic capability")]
    OracleDenied,

    #[error("line search failed after {trials} trials")]
    StepFailure { trials: usize },

    #[error("quantity undefined for a zero vector: {0}")]
    ZeroVector(&'static str),

    #[error("model build failed: {0}")]
    ModelBuild(String),

    #[error("lemma hypotheses violated: {0}")]
    Hypotheses(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
