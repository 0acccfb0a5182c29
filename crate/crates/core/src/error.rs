use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A metric whose definition requires something the data cannot supply
    /// (a missing class, no comparable pairs, zero variance).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("class {class} has {count} cases; at least 3 are needed to populate every split")]
    ClassTooSmall { class: String, count: usize },

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("no cutoff reaches the PPV floor {floor}")]
    FloorUnattainable { floor: f64 },

    #[error("did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("separation: {0}")]
    Separation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::UndefinedMetric(msg.into())
    }

    pub fn is_undefined_metric(&self) -> bool {
        matches!(self, Error::UndefinedMetric(_))
    }
}
