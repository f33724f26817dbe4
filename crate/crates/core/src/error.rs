use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = M3sError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum M3sError {
    #[error("sequence is constant (max == min = {value}); cannot rescale")]
    ConstantSequence { value: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid group count {groups} for a sequence of length {len}")]
    InvalidGroups { groups: usize, len: usize },

    #[error("value {value} at index {index} lies outside [-1, 1]")]
    Domain { index: usize, value: f64 },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("split would leave an empty partition (train {train}, test {test})")]
    EmptySplit { train: usize, test: usize },

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("sample `{id}` has no label")]
    UnlabeledSample { id: String },

    #[error("training loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("confusion matrix holds no samples")]
    EmptyMatrix,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl M3sError {
    /// Stable, machine-readable name of the error variant.
    pub fn name(&self) -> &'static str {
        match self {
            M3sError::ConstantSequence { .. } => "ConstantSequence",
            M3sError::NonFinite { .. } => "NonFinite",
            M3sError::InvalidGroups { .. } => "InvalidGroups",
            M3sError::Domain { .. } => "DomainError",
            M3sError::Parse { .. } => "ParseError",
            M3sError::Schema { .. } => "SchemaError",
            M3sError::EmptySplit { .. } => "EmptySplit",
            M3sError::InvalidConfig { .. } => "InvalidConfig",
            M3sError::Shape(_) => "ShapeError",
            M3sError::UnlabeledSample { .. } => "UnlabeledSample",
            M3sError::DivergedLoss { .. } => "DivergedLoss",
            M3sError::LengthMismatch { .. } => "LengthMismatch",
            M3sError::Empty(_) => "Empty",
            M3sError::EmptyMatrix => "EmptyMatrix",
            M3sError::Checkpoint(_) => "CheckpointError",
            M3sError::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        M3sError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        M3sError::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}
