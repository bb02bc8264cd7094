use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty file")]
    EmptyFile,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{format} parse error: {message}")]
    Parse { format: &'static str, message: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("no pixel pairs")]
    NoPixelPairs,

    #[error("image too small for LBP")]
    TooSmallForLbp,

    #[error("image too small for Gabor bank")]
    TooSmallForGabor,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("families missing from class map: {}", .0.join(", "))]
    UnmappedFamilies(Vec<String>),

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("class {label:?} has {count} record(s), need at least {needed}")]
    ClassTooSmall {
        label: String,
        count: usize,
        needed: usize,
    },

    #[error("missing feature {0:?}")]
    MissingFeature(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("unknown model kind {0:?}")]
    UnknownModelKind(String),

    #[error("model format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("{0}")]
    Data(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(format: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            format,
            message: message.into(),
        }
    }
}
