use thiserror::Error;

/// Errors raised anywhere in the testing pipeline.
#[derive(Debug, Error)]
pub enum GofError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("fewer than {0} distinct response values")]
    TooFewDistinct(usize),

    #[error("projection {0} is untransformable: {1}")]
    Untransformable(usize, String),

    #[error("no usable projection")]
    NoUsableProjection,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("row {row}, column '{column}': cannot parse '{value}'")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GofError>;
