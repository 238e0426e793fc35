use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("no cells selected by the mask ({0})")]
    EmptySelection(&'static str),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("point ({row}, {col}) outside grid {height}x{width}")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("transport solver failure: {0}")]
    SolverFailure(String),

    #[error("every candidate produced an empty mask")]
    AllCandidatesEmpty,

    #[error("scene cannot be generated: {0}")]
    SpecInfeasible(String),

    #[error("candidate (pos={pos}, neg={neg}): {source}")]
    Candidate {
        pos: usize,
        neg: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("sidecar protocol error: {message}\n{diagnostics}")]
    Protocol {
        message: String,
        diagnostics: String,
    },

    #[error("sidecar timed out after {seconds:.1}s\n{diagnostics}")]
    Timeout { seconds: f64, diagnostics: String },

    #[error("sidecar exited with status {status}\n{diagnostics}")]
    SidecarFailure { status: String, diagnostics: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
