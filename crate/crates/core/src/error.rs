use std::path::PathBuf;

/// Errors surfaced by the simulation, transform and diagnostic layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid exponent p = {0}: blow-up requires p > 1")]
    InvalidExponent(f64),

    #[error("invalid weight alpha = {alpha}: must exceed max(beta(beta+1)/2, 2) = {bound}")]
    InvalidWeight { alpha: f64, bound: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("initial profile error: {0}")]
    Profile(String),

    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("self-similar frame out of range: {0}")]
    FrameOutOfRange(String),

    #[error("history too short: {0}")]
    HistoryTooShort(String),

    #[error("insufficient growth: {found} samples in the fit window, need at least {needed}")]
    InsufficientGrowth { found: usize, needed: usize },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
