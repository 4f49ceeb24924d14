use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {reason}")]
    Field { field: String, reason: String },

    #[error(transparent)]
    Core(#[from] lsoc::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("refusing cache {}: {reason}", path.display())]
    Cache { path: PathBuf, reason: String },
}

impl HarnessError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 4 for file problems.
    pub fn exit_code(&self) -> i32 {
        use lsoc::Error as E;
        match self {
            Self::Parse { .. } | Self::Field { .. } => 2,
            Self::Core(
                E::NotConverged { .. } | E::Underflow(_) | E::NonFinite(_) | E::NotAbsolutelyContinuous(_),
            ) => 3,
            Self::Core(_) => 2,
            Self::Io { .. } | Self::Cache { .. } => 4,
        }
    }
}
