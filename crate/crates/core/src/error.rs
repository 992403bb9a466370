use std::path::PathBuf;

/// Error type shared by the library and the CLI.
///
/// Variants map onto the harness exit codes: configuration problems exit
/// with 2, I/O problems with 3 and numeric failures with 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameter values, malformed config/checkpoint/log content,
    /// or an operation asked to run outside its domain.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Non-finite intermediate values where finiteness is a contract.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// `step` called on a state whose step index already reached the horizon.
    #[error("horizon exceeded: step at t = {t} with horizon {horizon}")]
    HorizonExceeded { t: usize, horizon: usize },

    /// A policy produced an action that is not a point of its grid.
    #[error("invalid action: {0}")]
    InvalidAction(String),

    /// Every candidate action was masked out.
    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(String),

    /// A human profile that cannot act on the configured grid at all.
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    /// Malformed row in a text input, with its 1-based line number.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    /// Process exit code the CLI should terminate with for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
