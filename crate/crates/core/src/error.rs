use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the diarization back-end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),

    #[error("index {index} out of range for {n} embeddings")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("annotation list is empty")]
    EmptyAnnotations,

    #[error("embedding {0} is not covered by any annotated segment")]
    UncoveredEmbedding(usize),

    #[error("embedding {0} has zero norm")]
    ZeroNorm(usize),

    #[error("row {0} of the affinity matrix sums to zero")]
    ZeroRowSum(usize),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("iteration did not converge within {0} steps")]
    NoConvergence(usize),

    #[error("label sequences differ in length ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },

    #[error("word sequences differ between prediction and reference; use cpwer for ASR output")]
    WordMismatch,

    #[error("reference transcript contains no words")]
    EmptyReference,

    #[error("centroid sampling failed after {0} rejections")]
    CentroidSampling(usize),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), error: source }
    }

    /// True for errors caused by malformed or inconsistent input data, as
    /// opposed to bad arguments.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
