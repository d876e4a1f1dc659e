use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("not a valid density matrix: {0}")]
    NotPhysical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("scan has {samples} samples but at least {required} are needed to resolve harmonic {max_harmonic}")]
    Nyquist {
        samples: usize,
        required: usize,
        max_harmonic: u32,
    },

    #[error("angle grid is not evenly spaced over [0, pi) (sample {index})")]
    UnevenSpacing { index: usize },

    #[error("frequency set mismatch: {0}")]
    FrequencySetMismatch(String),

    #[error("internal consistency check failed: {0}")]
    SelfCheck(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code for the command-line front end.
    ///
    /// `2` input errors, `3` convergence failure, `4` sampling or physical
    /// validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) => 3,
            Error::Nyquist { .. } | Error::NotPhysical(_) | Error::SelfCheck(_) => 4,
            _ => 2,
        }
    }
}
