use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("degenerate element {index}: area {area:e}")]
    DegenerateElement { index: usize, area: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("discrete energy {energy:e} below floor {floor:e}; potential shift is not positive")]
    EnergyFloor { energy: f64, floor: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("non-finite value in state at step {step}")]
    NonFinite { step: usize },

    #[error("trajectories are not comparable: {0}")]
    Incomparable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
