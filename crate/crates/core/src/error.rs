use thiserror::Error;

pub type Result<T, E = SrtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SrtError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("line search failed to satisfy the sufficient-decrease condition after {steps} backtracking steps")]
    LineSearchFailure { steps: usize },

    #[error("singular linear system ({0}); use a positive leaf regularizer lambda_beta")]
    SingularSystem(String),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SrtError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SrtError::InvalidInput(msg.into())
    }

    /// True for failures that originate in the numerical kernels rather than in
    /// malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            SrtError::LineSearchFailure { .. }
                | SrtError::SingularSystem(_)
                | SrtError::DegenerateWeights(_)
        )
    }
}
