use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate scene_id {id:?} at line {line} (first seen at line {first_line})")]
    DuplicateSceneId {
        id: String,
        line: usize,
        first_line: usize,
    },

    #[error("invalid scene record at line {line}: {message}")]
    InvalidRecord { line: usize, message: String },

    #[error("dangling {space} row reference: scene {scene_id:?} points at row {row} but matrix has {count} rows")]
    DanglingRow {
        space: &'static str,
        scene_id: String,
        row: usize,
        count: usize,
    },

    #[error("{space} matrix binding mismatch: {message}")]
    Binding {
        space: &'static str,
        message: String,
    },

    #[error("bad SSEV file: {0}")]
    Format(String),

    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },

    #[error("zero vector in row {row}")]
    ZeroRow { row: usize },

    #[error("row {row} is flagged normalized but has norm {norm}")]
    NotNormalized { row: usize, norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dataset {0:?} has no {1} embeddings bound")]
    MissingMatrix(String, &'static str),

    #[error("scene {0:?} has no labels")]
    Unlabeled(String),

    #[error("invalid report: {0}")]
    InvalidReport(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Stable short identifier used in machine-readable CLI errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedLine { .. } => "malformed_line",
            Error::DuplicateSceneId { .. } => "duplicate_scene_id",
            Error::InvalidRecord { .. } => "invalid_record",
            Error::DanglingRow { .. } => "dangling_row",
            Error::Binding { .. } => "binding",
            Error::Format(_) => "format",
            Error::NonFinite { .. } => "non_finite",
            Error::ZeroRow { .. } => "zero_row",
            Error::NotNormalized { .. } => "not_normalized",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::InvalidParam(_) => "invalid_param",
            Error::MissingMatrix(..) => "missing_matrix",
            Error::Unlabeled(_) => "unlabeled",
            Error::InvalidReport(_) => "invalid_report",
            Error::Provider(_) => "provider",
            Error::Json { .. } => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
