use std::path::PathBuf;

/// Errors raised by the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] egc_core::Error),
    #[error("input error: {0}")]
    Input(String),
    #[error("cannot access '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in '{path}': {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("schema error in '{path}' at {at}: {message}")]
    Schema {
        path: PathBuf,
        at: String,
        message: String,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_domain() => 3,
            _ => 2,
        }
    }
}
