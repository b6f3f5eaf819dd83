use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CANT_CREATE: i32 = 73;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] semidi_core::Error),
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Input { path: path.into(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        use semidi_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Input { .. } => EXIT_USAGE,
            CliError::Output { .. } => EXIT_CANT_CREATE,
            CliError::Core(E::Solver(_)) => EXIT_INCONCLUSIVE,
            CliError::Core(E::Io(_) | E::Csv(_)) => EXIT_CANT_CREATE,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
