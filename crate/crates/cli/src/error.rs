use std::fmt;
use std::path::Path;

use tuckercomp::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }

    /// Wraps a library error raised while handling `path`.
    pub fn at(path: &Path, err: Error) -> Self {
        let mut e = Self::from(err);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::BadMagic { .. } | Error::Truncated(_) | Error::Format(_) => EXIT_IO,
        Error::Divergence { .. } | Error::SvdNoConvergence { .. } | Error::ZeroFactor { .. } => EXIT_DIVERGENCE,
        Error::Shape(_)
        | Error::ModeOutOfRange { .. }
        | Error::InvalidDims(_)
        | Error::NonFinite(_)
        | Error::NegativeThreshold(_)
        | Error::DegenerateLaplacian { .. }
        | Error::EmptyMask
        | Error::Config(_)
        | Error::UndefinedMetric(_) => EXIT_CONFIG,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self { code: exit_code(&err), message: err.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::io(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        Self::io(format!("json: {err}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        Self::io(format!("csv: {err}"))
    }
}
