use std::fmt;
use std::path::Path;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;

/// An error paired with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_USAGE, error: error.into() }
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_IO, error: error.into() }
    }

    pub fn degenerate(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_DEGENERATE, error: error.into() }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        Self { code: self.code, error: self.error.context(what.to_string()) }
    }
}

impl From<qburst::Error> for Failure {
    fn from(e: qburst::Error) -> Self {
        use qburst::Error::*;
        let code = match e {
            Io(_) => EXIT_IO,
            Degenerate(_) | NoUsableEvents => EXIT_DEGENERATE,
            _ => EXIT_USAGE,
        };
        Self { code, error: e.into() }
    }
}

pub type Outcome<T> = Result<T, Failure>;

/// Attaches the path to an I/O error and maps it to the I/O exit code.
pub fn io_at<T>(r: std::io::Result<T>, path: &Path) -> Outcome<T> {
    r.map_err(|e| Failure::io(anyhow::Error::new(e).context(format!("{}", path.display()))))
}
