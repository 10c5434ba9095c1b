use std::path::PathBuf;

/// Errors surfaced by the readout pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("frame too small: {h}x{w} (minimum {min}x{min})")]
    FrameTooSmall { h: usize, w: usize, min: usize },

    #[error("degenerate normalization range")]
    DegenerateNormalization,

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("site {row},{col}: {message}")]
    Site {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("gaussian mixture fit degenerate: {0}")]
    DegenerateMixture(String),

    #[error("probability out of range: {name} = {value}")]
    Probability { name: String, value: f64 },

    #[error("channel not completely positive: T2 = {t2} exceeds 2*T1 = {two_t1}")]
    NotCompletelyPositive { t2: f64, two_t1: f64 },

    #[error("corrupt artifact {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("missing artifact: {0}")]
    Missing(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::Missing(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            message: message.into(),
        }
    }
}
