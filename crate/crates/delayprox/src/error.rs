use thiserror::Error;

/// Errors surfaced by instance generation, configuration and runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample index {index} out of range for instance with {m} measurements")]
    SampleOutOfRange { index: usize, m: usize },

    #[error("delayed info variant does not match the requested operation: {0}")]
    InfoVariantMismatch(&'static str),

    #[error("root search failed to bracket a sign change (malformed kernel?)")]
    RootBracketing,

    #[error("iterate became non-finite at iteration {k}: {context}")]
    Diverged { k: usize, context: String },

    #[error("worker thread failed: {0}")]
    WorkerFailure(String),

    #[error("malformed instance file: {0}")]
    MalformedInstance(String),

    #[error("malformed run record: {0}")]
    MalformedRecord(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
