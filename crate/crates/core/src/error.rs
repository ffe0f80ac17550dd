use std::path::PathBuf;

use thiserror::Error;

use crate::pairgen::BlockTask;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset must contain at least one point")]
    EmptyDataset,

    #[error("dataset must have at least one feature column")]
    NoFeatures,

    #[error("feature matrix has {len} values, expected {n} x {d}")]
    ShapeMismatch { n: usize, d: usize, len: usize },

    #[error("point {point}, feature {feature} is not finite ({value})")]
    NonFiniteValue { point: usize, feature: usize, value: f64 },

    #[error("line {line}: feature column {column} is not finite ({value})")]
    NonFiniteField { line: u64, column: usize, value: String },

    #[error("line {line}: cannot parse '{value}' in column {column} as a number")]
    NonNumericField { line: u64, column: usize, value: String },

    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },

    #[error("input file {0} contains no data rows")]
    EmptyFile(PathBuf),

    #[error("line {line}: duplicate point id '{id}'")]
    DuplicateId { line: u64, id: String },

    #[error("duplicate point id '{0}'")]
    DuplicateIdValue(String),

    #[error("id column '{0}' not found")]
    UnknownIdColumn(String),

    #[error("{got} ids supplied for {n} points")]
    IdCountMismatch { n: usize, got: usize },

    #[error("vectors have different dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },

    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("points {0} and {1} already belong to the same cluster")]
    SameCluster(usize, usize),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("settings line {line}: {message}")]
    Settings { line: usize, message: String },

    #[error("oracle refuses n = {n} (limit {limit})")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("worker failed on block pair ({}, {}): {message}", task.left, task.right)]
    WorkerFailed { task: BlockTask, message: String },

    #[error("pipeline stalled: {0}")]
    Pipeline(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures are caused by bad input or configuration; everything
    /// else is a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::WorkerFailed { .. } | Error::Pipeline(_) | Error::Io { .. } | Error::Json(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
