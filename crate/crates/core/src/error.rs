use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Io,
    Validation,
    Degenerate,
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate cell: item {item:?}, annotator {annotator:?}, round {round}")]
    DuplicateCell {
        item: String,
        annotator: String,
        round: u32,
    },
    #[error("label {label:?} (item {item:?}) is not a category of the schema")]
    UnknownLabel { label: String, item: String },
    #[error("record task_id {found:?} does not match schema task_id {expected:?}")]
    SchemaMismatch { expected: String, found: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("no annotator labelled any item in two or more rounds")]
    NoRepeats,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("annotators {a:?} and {b:?} share no labelled items")]
    NoOverlap { a: String, b: String },
    #[error("chance agreement is 1 but observed agreement is {observed}")]
    ChanceDegenerate { observed: f64 },
    #[error("expected disagreement is zero but observed disagreement is {observed}")]
    ZeroExpected { observed: f64 },
    #[error("ICC requires an interval scale, schema is {0}")]
    NotInterval(String),
    #[error("zero between-subject and residual variance")]
    InsufficientVariance,
    #[error("{dropped} of {total} bootstrap replicates were degenerate")]
    TooManyDegenerate { dropped: usize, total: usize },
    #[error("no repeat pair carries an interval (timestamps missing)")]
    NoIntervals,
    #[error("interval profile needs at least two non-empty buckets, found {0}")]
    TooFewBuckets(usize),
    #[error("non-finite score: {0}")]
    NonFinite(f64),
    #[error("no item qualifies for item-level classification")]
    NoQualifyingItems,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("contingency table has a zero margin")]
    ZeroMargin,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("assignment and truth subjects differ: {0}")]
    CoverageMismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateCell { .. } => "DuplicateCell",
            Error::UnknownLabel { .. } => "UnknownLabel",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::InvalidRecord(_) => "InvalidRecord",
            Error::NoRepeats => "NoRepeats",
            Error::Degenerate(_) => "Degenerate",
            Error::NoOverlap { .. } => "NoOverlap",
            Error::ChanceDegenerate { .. } => "ChanceDegenerate",
            Error::ZeroExpected { .. } => "ZeroExpected",
            Error::NotInterval(_) => "NotInterval",
            Error::InsufficientVariance => "InsufficientVariance",
            Error::TooManyDegenerate { .. } => "TooManyDegenerate",
            Error::NoIntervals => "NoIntervals",
            Error::TooFewBuckets(_) => "TooFewBuckets",
            Error::NonFinite(_) => "NonFinite",
            Error::NoQualifyingItems => "NoQualifyingItems",
            Error::Empty(_) => "Empty",
            Error::ZeroMargin => "ZeroMargin",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::CoverageMismatch(_) => "CoverageMismatch",
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::DuplicateCell { .. }
            | Error::UnknownLabel { .. }
            | Error::SchemaMismatch { .. }
            | Error::InvalidSchema(_)
            | Error::InvalidRecord(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::CoverageMismatch(_) => ErrorKind::Validation,
            Error::InvalidConfig(_) => ErrorKind::Config,
            _ => ErrorKind::Degenerate,
        }
    }

    /// True for errors a resampled replicate may legitimately hit.
    pub fn is_degenerate(&self) -> bool {
        self.kind() == ErrorKind::Degenerate
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
