use std::io;
use std::path::Path;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const DEGENERATE_DATA: i32 = 4;
    pub const CHAIN_FAILURE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line; the message is clap's rendered report.
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Json(String),

    #[error(transparent)]
    Core(#[from] dualrec::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dualrec::Error as E;
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Json(_) => exit::PARSE,
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::OTHER,
            CliError::Core(e) => match e {
                E::Config(_) | E::Domain(_) | E::InfeasibleSpec(_) => exit::CONFIG,
                E::DegenerateData(_) | E::UndefinedEstimator { .. } => exit::DEGENERATE_DATA,
                E::ChainFailure { .. } | E::Underflow { .. } => exit::CHAIN_FAILURE,
                E::DegenerateDiagnostic(_) | E::Study(_) => exit::OTHER,
            },
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
