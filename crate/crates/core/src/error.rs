use std::path::PathBuf;

use crate::knowledge::KbError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, emptiness).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("loss function is not deterministic: {first} != {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("vocabulary hash mismatch: checkpoint has {expected}, got {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A pipeline stage ran before the stage that produces its inputs.
    #[error("missing {what} at {path}; run `{stage}` first")]
    MissingStage { what: String, path: PathBuf, stage: &'static str },

    #[error(transparent)]
    Kb(#[from] KbError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for validation problems, 2 for I/O and network.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Kb(e) if e.is_validation() => 1,
            Error::Kb(_) | Error::Io { .. } | Error::MissingStage { .. } => 2,
            _ => 1,
        }
    }
}

/// Bails out with a contract violation when `cond` is false.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
