use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, KgeError>;

#[derive(Debug, Error)]
pub enum KgeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("unsupported derivative order {0} (expected 1 or 2)")]
    UnsupportedDerivativeOrder(u32),

    #[error("unsupported nonlinearity derivative k = {0} (expected 0..=4)")]
    UnsupportedNonlinearityDerivative(usize),

    #[error("unsupported scheme order {0} (expected 2, 4 or 6)")]
    UnsupportedOrder(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "requested {requested} nonlinearity derivatives but the bundle only holds time derivatives up to {available}"
    )]
    BundleTooShallow { requested: usize, available: usize },

    #[error("final time {t_final} is not an integer multiple of the step {tau}")]
    NonIntegerStepCount { t_final: f64, tau: f64 },

    #[error("solution blew up at step {step} (t = {t}); the time step is likely beyond the stability limit")]
    Instability { step: usize, t: f64 },

    #[error("grids are incompatible: {0}")]
    IncompatibleGrids(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("reference cache error in {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
