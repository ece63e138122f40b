use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate ray: zero vector has no projector")]
    DegenerateRay,

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {reason}")]
    InvalidDensityMatrix { reason: String },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("assignment alphabet mismatch: expected {expected}, got {found}")]
    AlphabetMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("pulse parameter {name} = {value} outside [0, 2pi)")]
    PulseRange { name: &'static str, value: f64 },

    #[error("unknown measurement setting {0}")]
    UnknownSetting(String),

    #[error("setting {setting} fails mapping of ray v{ray} to |{basis}>: overlap deficit {deficit:.3e}")]
    MappingFailure {
        setting: String,
        ray: usize,
        basis: usize,
        deficit: f64,
    },

    #[error("basis state |3> is already the detection state; no swap pulse exists")]
    SwapOnDetectionState,

    #[error("plan error: {0}")]
    Plan(String),

    #[error("impossible branch: {0}")]
    ImpossibleBranch(String),

    #[error("invalid noise model: {0}")]
    Noise(String),

    #[error("invalid estimate input: {0}")]
    Estimate(String),

    #[error("confusion model not invertible: eps_dark_to_bright + eps_bright_to_dark = {0} >= 1")]
    NotInvertible(f64),

    #[error("missing estimate: {0}")]
    MissingEstimate(String),

    #[error("standard error is zero; significance undefined")]
    ZeroStderr,

    #[error("tomography response map has rank {rank} < 9")]
    RankDeficient { rank: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
