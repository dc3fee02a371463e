use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("file is empty")]
    EmptyFile,
    #[error("column `{0}` is missing")]
    MissingColumn(String),
    #[error("column `{0}` is not part of the schema")]
    UnexpectedColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("non-numeric cell {value:?} at row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("value {value} at row {row}, column `{column}` is not an allowed level")]
    InvalidLevel {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("profile has no columns")]
    EmptyProfile,
    #[error("profile value {value} in `{field}` is not rounded to {decimals} decimals")]
    NotRounded {
        field: String,
        value: f64,
        decimals: u32,
    },
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("correlation matrix could not be repaired: {0}")]
    NotRepairable(String),

    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out after {0} attempt(s)")]
    Timeout(u32),
    #[error("response contained no tabular content")]
    RefusalDetected,
    #[error("no table found in response")]
    NoTableFound,
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{0} dataset is empty")]
    EmptyDataset(&'static str),
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code, used by the CLI on its single error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IO",
            Error::Csv(_) => "CSV",
            Error::Json(_) => "JSON",
            Error::InvalidSchema(_) => "INVALID_SCHEMA",
            Error::EmptyFile => "EMPTY_FILE",
            Error::MissingColumn(_) => "MISSING_COLUMN",
            Error::UnexpectedColumn(_) => "UNEXPECTED_COLUMN",
            Error::UnknownColumn(_) => "UNKNOWN_COLUMN",
            Error::DuplicateName(_) => "DUPLICATE_NAME",
            Error::NonNumericCell { .. } => "NON_NUMERIC_CELL",
            Error::MissingValue { .. } => "MISSING_VALUE",
            Error::InvalidLevel { .. } => "INVALID_LEVEL",
            Error::RaggedRow { .. } => "RAGGED_ROW",
            Error::TooFewRows(_) => "TOO_FEW_ROWS",
            Error::ZeroVariance(_) => "ZERO_VARIANCE",
            Error::LengthMismatch(..) => "LENGTH_MISMATCH",
            Error::EmptyProfile => "EMPTY_PROFILE",
            Error::NotRounded { .. } => "NOT_ROUNDED",
            Error::InvalidTemplate(_) => "INVALID_TEMPLATE",
            Error::InvalidSpec(_) => "INVALID_SPEC",
            Error::InvalidProfile(_) => "INVALID_PROFILE",
            Error::NotRepairable(_) => "NOT_REPAIRABLE",
            Error::Network(_) => "NETWORK",
            Error::Auth(_) => "AUTH",
            Error::Timeout(_) => "TIMEOUT",
            Error::RefusalDetected => "REFUSAL_DETECTED",
            Error::NoTableFound => "NO_TABLE_FOUND",
            Error::HeaderMismatch(_) => "HEADER_MISMATCH",
            Error::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            Error::EmptyDataset(_) => "EMPTY_DATASET",
            Error::InvalidTolerance(_) => "INVALID_TOLERANCE",
        }
    }
}
