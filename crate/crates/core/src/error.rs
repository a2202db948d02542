use std::path::PathBuf;

/// Errors raised by the cut engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size {size} exceeds the cap of {cap} for {what}")]
    SizeCap { what: &'static str, size: usize, cap: usize },

    #[error("invalid input: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checksum mismatch in {path}: header says {expected}, body hashes to {found}")]
    Checksum { path: PathBuf, expected: String, found: String },

    #[error("unsupported format version {0}")]
    Version(String),

    #[error("LP solver failed: {0}")]
    LpFailure(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    EigenNoConvergence { sweeps: usize, off: f64 },

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("callback failed: {0}")]
    Callback(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Whether the error comes from floating-point machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::LpFailure(_) | Error::EigenNoConvergence { .. } | Error::Overflow(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
