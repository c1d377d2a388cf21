use std::fmt;

use thiserror::Error;

/// Position in an input file, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub source: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.source, self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{location}: {message}")]
    Syntax { location: Location, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Domain(#[from] holonomy::Error),
}

impl CliError {
    pub fn syntax(source: &str, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self::Syntax {
            location: Location {
                source: source.to_string(),
                line,
                column,
            },
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::Usage(message.into())
    }

    /// 1 for domain errors, 2 for anything wrong with the input itself.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Domain(_) => 1,
            Self::Syntax { .. } | Self::Usage(_) | Self::Io { .. } => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
