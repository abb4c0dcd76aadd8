use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("decode error at row {row}, column `{column}`: {message}")]
    Decode {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("labels contain a single class")]
    DegenerateLabels,

    #[error("class {class} has {have} rows, at least {need} required")]
    InsufficientClassRows { class: u8, have: usize, need: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite gradient for `{param}` ({context})")]
    NonFiniteGradient { param: String, context: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("ratio {value} is invalid: {reason}")]
    Ratio { value: f64, reason: String },

    #[error("draw limit exceeded: kept {kept} of {wanted} rows after {draws} draws")]
    DrawLimitExceeded {
        kept: usize,
        wanted: usize,
        draws: usize,
    },

    #[error("empty generation region: {0}")]
    EmptyGenerationRegion(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("strategy mismatch: {0}")]
    StrategyMismatch(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Self::Json {
            context: context.into(),
            source,
        }
    }

    pub fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Self::Csv {
            context: context.into(),
            source,
        }
    }

    /// Stable process exit code for the command-line front end. Zero is never
    /// returned.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Json { .. } | Error::Csv { .. } => 3,
            Error::Schema(_) => 4,
            Error::Decode { .. } => 5,
            Error::Config(_) => 6,
            Error::Ratio { .. } => 7,
            Error::StrategyMismatch(_) => 8,
            Error::DegenerateLabels => 9,
            Error::InsufficientClassRows { .. } => 10,
            Error::InsufficientData(_) => 11,
            Error::Shape(_) => 12,
            Error::NonFiniteGradient { .. } => 13,
            Error::DrawLimitExceeded { .. } => 14,
            Error::EmptyGenerationRegion(_) => 15,
            Error::DegenerateData(_) => 16,
        }
    }
}
