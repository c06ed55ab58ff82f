use std::path::PathBuf;

use thiserror::Error;

use crate::dgp::Violation;

/// Errors raised by the audit engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid DGP spec: {}", first_violation(.0))]
    InvalidSpec(Vec<Violation>),

    #[error("input error: {0}")]
    Input(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn first_violation(violations: &[Violation]) -> String {
    match violations.first() {
        Some(v) if violations.len() > 1 => format!("{v} (and {} more)", violations.len() - 1),
        Some(v) => v.to_string(),
        None => "unknown violation".to_string(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
