use std::path::PathBuf;

use thiserror::Error;

use crate::spectra::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Savitzky-Golay window: 2*{half_width}+1 points exceeds spectrum length {len}")]
    InvalidWindow { half_width: usize, len: usize },

    #[error("invalid Savitzky-Golay order {order} for window of {window} points")]
    InvalidOrder { order: usize, window: usize },

    #[error("stage violation: operation requires {expected:?}, spectrum is {found:?}")]
    StageViolation { expected: Stage, found: Stage },

    #[error("polynomial fit failed: {0}")]
    FitFailure(String),

    #[error("window [{lo}, {hi}] cm-1 does not overlap the wavenumber axis")]
    WindowMiss { lo: f64, hi: f64 },

    #[error("degenerate phenylalanine peak (intensity {intensity}) in spectrum {sample_id}")]
    DegeneratePeak { sample_id: String, intensity: f64 },

    #[error("wavenumber grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("pipeline halted: {0}")]
    PipelineHalt(String),

    #[error("cohort assembly failed: {0}")]
    Assembly(String),

    #[error("invalid split request: {0}")]
    Split(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize, trace: Vec<crate::models::EpochRecord> },

    #[error("training failed: {0}")]
    Training(String),

    #[error("explanation failed: {0}")]
    Explain(String),

    #[error("degenerate perturbation variance for feature `{0}`")]
    DegeneratePerturbation(String),

    #[error("feature `{feature}` is outside the wavenumber grid ({grid_len} points)")]
    FeatureOutsideGrid { feature: String, grid_len: usize },

    #[error("library error: {0}")]
    Library(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Divergence { .. } | Error::Training(_) => 4,
            _ => 3,
        }
    }
}
