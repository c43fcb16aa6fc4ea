use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("degenerate targets: {0}")]
    DegenerateTargets(String),

    #[error("degenerate ltrb: all distances are zero")]
    DegenerateLtrb,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unsupported schema `{schema}` version {version}")]
    UnsupportedSchema { schema: String, version: u64 },

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used for CLI exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidBox(_) | Error::DegenerateTargets(_) | Error::DegenerateLtrb => "domain",
            Error::InvalidParams(_) => "validation",
            Error::UnsupportedSchema { .. } | Error::Json(_) => "schema",
            Error::FrameMismatch(_) => "validation",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
