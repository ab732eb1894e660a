use std::path::PathBuf;

/// Errors raised by the feature pipeline, classifiers and harness.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("image is {width}x{height}, need at least 8x8")]
    DimensionTooSmall { width: usize, height: usize },

    #[error("image yields {blocks} block(s), need at least {needed}")]
    TooFewBlocks { blocks: usize, needed: usize },

    #[error("need at least 2 samples to estimate a scale, got {0}")]
    InsufficientSamples(usize),

    #[error("quality factor {0} outside [1, 100]")]
    QualityOutOfRange(i64),

    #[error("no rows for class {0}")]
    MissingClass(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("training data has a single class")]
    SingleClass,

    #[error("class {class} has {count} training rows, need at least {folds} for {folds}-fold CV")]
    FoldConstruction {
        class: &'static str,
        count: usize,
        folds: usize,
    },

    #[error("empty test set")]
    EmptyTest,

    #[error("model classified no test row correctly")]
    NoCorrectPredictions,

    #[error("operation requires an MLP model, got {0}")]
    NotAnMlp(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("malformed {kind} file {path}: {msg}")]
    Format {
        kind: &'static str,
        path: PathBuf,
        msg: String,
    },

    #[error("unsupported model file version {0}")]
    ModelVersion(u32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            path: path.into(),
            msg: msg.into(),
        }
    }
}
