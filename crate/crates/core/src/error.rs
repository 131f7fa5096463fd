use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violated a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An index or value fell outside its admissible range.
    #[error("range error: {0}")]
    Range(String),

    /// Vector or matrix dimensions did not line up.
    #[error("shape error: expected {expected}, got {got} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Configuration is missing, inconsistent, or mismatched.
    #[error("config error: {0}")]
    Config(String),

    /// A persisted file had an unexpected version tag.
    #[error("version mismatch: file has {found:?}, expected {expected:?}")]
    Version { found: String, expected: String },

    /// A persisted file could not be parsed.
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// An internal invariant was broken; indicates a bug.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            what,
            expected,
            got,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Invariant(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::shape(what, expected, got))
    }
}
