use thiserror::Error;
use urtlab_core::ErrorKind;

/// Process exit codes.
pub mod exit {
    pub const USAGE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const VERIFY_FAILED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] urtlab_core::Error),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Validation(_) | Self::Output { .. } => exit::VALIDATION,
            Self::Core(e) => match e.kind() {
                ErrorKind::Validation => exit::VALIDATION,
                ErrorKind::NumericPrecondition => exit::NUMERIC,
            },
        }
    }
}
