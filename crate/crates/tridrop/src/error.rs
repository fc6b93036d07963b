use std::path::PathBuf;

/// Failures surfaced by the CLI, each mapped to a distinct exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("internal equivalence failure: {0}")]
    Equivalence(String),
    #[error(transparent)]
    Core(#[from] tridrop_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(offset: u64, message: impl Into<String>) -> Self {
        CliError::Format {
            offset,
            message: message.into(),
        }
    }

    /// 2 config, 3 I/O, 4 format or data, 5 numeric, 6 equivalence.
    pub fn exit_code(&self) -> i32 {
        use tridrop_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Format { .. } => 4,
            CliError::Numeric(_) => 5,
            CliError::Equivalence(_) => 6,
            CliError::Core(e) => match e {
                E::Dimension { .. } | E::Range { .. } | E::Config(_) => 2,
                E::Data(_) => 4,
                E::Numeric(_) => 5,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
