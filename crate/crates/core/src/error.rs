use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate row for ({date}, {ticker})")]
    Duplicate {
        line: usize,
        date: String,
        ticker: String,
    },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("panel is empty after cleaning: {0}")]
    EmptyPanel(String),

    #[error("panel is not rectangular: asset {asset} has no record on {date}")]
    NotRectangular { asset: String, date: String },

    #[error("date {0} is outside the panel's date range")]
    Range(String),

    #[error("split `{0}` would be empty")]
    EmptySplit(&'static str),

    #[error("length error: {0}")]
    Length(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("insufficient history: need t >= {needed}, got t = {t}")]
    InsufficientHistory { needed: usize, t: usize },

    #[error("replay buffer holds {len} transitions, {requested} requested")]
    Underfull { len: usize, requested: usize },

    #[error("config: {0}")]
    Config(String),

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

    /// Process exit code for the CLI: 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
