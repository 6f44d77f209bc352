use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("scene sampler gave up after {attempts} attempts (min separation {min_separation})")]
    SamplerExhausted { attempts: usize, min_separation: f64 },

    #[error("SNR is undefined for a scene without components")]
    EmptyScene,

    #[error("unknown window `{0}` (supported: rect, hann, hamming)")]
    UnknownWindow(String),

    #[error("nonpositive eigenvalue {0}")]
    NonPositiveEigenvalue(f64),

    #[error("{op} has no reverse pass")]
    NoReversePass { op: String },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("config hash mismatch: checkpoint has {found}, expected {expected}")]
    ConfigHashMismatch { expected: String, found: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    /// Attach `path` to a bare I/O error.
    pub fn at(self, path: &std::path::Path) -> Self {
        match self {
            Error::Io(source) => Error::File { path: path.to_path_buf(), source },
            e => e,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
