//! Process-level error classification. Every failure maps onto one of three
//! exit codes: 1 for usage problems, 2 for file-system problems, 3 for
//! numerical failures inside the estimation itself.

use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Wraps a raw I/O error with the path it happened on.
    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// A parse failure inside a data file (counts as an I/O problem: the
    /// file, not the invocation, is at fault).
    pub fn malformed(path: &Path, detail: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: malformed file: {detail}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<mefm::Error> for CliError {
    fn from(e: mefm::Error) -> Self {
        match &e {
            mefm::Error::NonConvergence { .. }
            | mefm::Error::Degenerate(_)
            | mefm::Error::SeriesFailures { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
