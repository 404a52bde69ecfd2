use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("model diverged: non-finite output at decode step {step}")]
    DivergedModel { step: usize },

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    DivergedTraining { epoch: usize },

    #[error("gradient check failed: loss is not finite")]
    NonFiniteLoss,

    #[error("unsupported architecture for {op}: {arch}")]
    UnsupportedArch { op: &'static str, arch: String },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("weight file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt weight file: {0}")]
    CorruptFile(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("cannot parse cell at row {row}, column `{column}`: {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("column `{column}` has a missing value at row {row} with nothing to forward-fill from")]
    MissingValue { row: usize, column: String },

    #[error("column `{0}` is constant on the training rows and cannot be standardized")]
    ConstantColumn(String),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("R² undefined: target variance is zero")]
    UndefinedR2,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, left: &Shape, right: &Shape) -> Self {
        Error::Shape {
            op,
            left: left.clone(),
            right: right.clone(),
        }
    }
}
