use std::fmt;
use std::path::{Path, PathBuf};

pub const EXIT_CHECK: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_GRID: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Core(unmix_core::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Usage(String),
    Check(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use unmix_core::Error as E;
        match self {
            CliError::Check(_) => EXIT_CHECK,
            CliError::Io { .. } | CliError::Core(E::Io { .. }) => EXIT_IO,
            CliError::Core(E::GridMismatch(_)) => EXIT_GRID,
            CliError::Core(_) | CliError::Usage(_) => EXIT_VALIDATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<unmix_core::Error> for CliError {
    fn from(e: unmix_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(unmix_core::Error::Json(e))
    }
}
