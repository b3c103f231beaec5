use thiserror::Error;

pub type Result<T> = std::result::Result<T, SdmError>;

#[derive(Debug, Error)]
pub enum SdmError {
    /// A text input (raster, CSV, model file) could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Column layout or feature names disagree between two artifacts.
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expected {expected} features, got {got}")]
    Arity { expected: usize, got: usize },

    #[error(
        "pseudo-absence sampling gave up after {attempts} attempts: accepted {accepted} of {requested} \
         (acceptance rate {rate:.4}); the presence set is too dense for the region"
    )]
    AttemptsExhausted {
        requested: usize,
        accepted: usize,
        attempts: usize,
        rate: f64,
    },

    #[error("class {class} has {available} < {requested} samples")]
    InsufficientClass {
        class: u8,
        available: usize,
        requested: usize,
    },

    #[error("zero surviving samples ({dropped} dropped on nodata)")]
    EmptyDataset { dropped: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SdmError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        SdmError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        SdmError::InvalidInput(message.into())
    }
}
