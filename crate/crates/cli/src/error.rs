use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit status for input parse failures.
pub const EXIT_PARSE: i32 = 2;
/// Process exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}{}{message}", FileTag(file), LineTag(*line))]
    Parse {
        file: Option<PathBuf>,
        line: Option<u64>,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pointmatch_core::Error),
}

struct FileTag<'a>(&'a Option<PathBuf>);

impl fmt::Display for FileTag<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => write!(f, "{}: ", p.display()),
            None => Ok(()),
        }
    }
}

struct LineTag(Option<u64>);

impl fmt::Display for LineTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(n) => write!(f, "line {n}: "),
            None => Ok(()),
        }
    }
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError::Parse {
            file: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Parse { line, message, .. } => CliError::Parse {
                file: Some(path.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use pointmatch_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Io { .. } => EXIT_PARSE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::DuplicateImage(_) | E::ClassOutOfRange { .. } | E::NonFinite { .. } => EXIT_PARSE,
                _ => EXIT_CONFIG,
            },
        }
    }
}
