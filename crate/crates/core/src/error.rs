use std::path::PathBuf;

use crate::optimizer::OptimizeReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps these onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Backend,
    Integrity,
    Divergence,
    NotFound,
    Io,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Backend => "backend",
            ErrorKind::Integrity => "integrity",
            ErrorKind::Divergence => "divergence",
            ErrorKind::NotFound => "not_found",
            ErrorKind::Io => "io",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("layout mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("backend capability missing: {0}")]
    Capability(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("empty prompt")]
    EmptyPrompt,

    #[error("prompt {0:?} is not in the embedder vocabulary")]
    UnknownToken(String),

    #[error("degenerate prompt pair: {0}")]
    DegeneratePrompt(String),

    #[error("embedding space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("direction was found for backend {direction} but the active backend is {backend}")]
    FingerprintMismatch { direction: String, backend: String },

    #[error("optimization diverged: {reason}")]
    Divergence {
        reason: String,
        report: Box<OptimizeReport>,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidLayout(_)
            | Error::InvalidConfig(_)
            | Error::InvalidInput(_)
            | Error::EmptyPrompt
            | Error::UnknownToken(_)
            | Error::DegeneratePrompt(_)
            | Error::SpaceMismatch(_)
            | Error::LayoutMismatch { .. } => ErrorKind::Usage,
            Error::Capability(_) | Error::Backend(_) | Error::FingerprintMismatch { .. } => {
                ErrorKind::Backend
            }
            Error::Divergence { .. } => ErrorKind::Divergence,
            Error::Integrity(_) | Error::UnsupportedVersion { .. } | Error::Json(_) => {
                ErrorKind::Integrity
            }
            Error::NotFound(_) => ErrorKind::NotFound,
            Error::Io { .. } | Error::Image(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
