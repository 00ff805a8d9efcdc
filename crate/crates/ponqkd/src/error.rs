use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// A single schema or range violation, addressed by its dotted config path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("planning error: {0}")]
    Planning(String),
    #[error("{}", format_validation(.0))]
    Validation(Vec<FieldError>),
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sweep aborted at {axis} = {value}: {source}")]
    SweepAborted {
        axis: String,
        value: f64,
        /// Rows computed before the failing point.
        completed: Box<crate::scenario::RunArtifact>,
        source: Box<Error>,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

fn format_validation(errors: &[FieldError]) -> String {
    let mut out = format!("{} validation error(s)", errors.len());
    for e in errors {
        out.push_str("\n  ");
        out.push_str(&e.to_string());
    }
    out
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
