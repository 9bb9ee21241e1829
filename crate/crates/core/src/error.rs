use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CgstaeError>;

#[derive(Debug, Error)]
pub enum CgstaeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("layout error: {0}")]
    Layout(String),

    #[error("stage order violated: missing upstream artifact {}", .missing.display())]
    StageOrder { missing: PathBuf },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl CgstaeError {
    /// Short machine-readable tag used in CLI error JSON and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            CgstaeError::Dimension(_) => "dimension",
            CgstaeError::Argument(_) => "argument",
            CgstaeError::State(_) => "state",
            CgstaeError::Numeric(_) => "numeric",
            CgstaeError::Parse { .. } => "parse",
            CgstaeError::Layout(_) => "layout",
            CgstaeError::StageOrder { .. } => "stage_order",
            CgstaeError::Config(_) => "config",
            CgstaeError::Io { .. } => "io",
            CgstaeError::Serde(_) => "serde",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CgstaeError::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure_dims {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::CgstaeError::Dimension(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure_dims;
