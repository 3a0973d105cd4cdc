use thiserror::Error;

use crate::baselines::BaselineError;
use crate::bench::BenchError;
use crate::calibrate::CalibrateError;
use crate::diagnose::DiagnoseError;
use crate::grid::GridError;
use crate::synth::SynthError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Diagnose(#[from] DiagnoseError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Calibrate(e) => e.is_numerical(),
            Error::Grid(GridError::DegenerateDensity) => true,
            Error::Diagnose(DiagnoseError::Calibrate(e)) => e.is_numerical(),
            Error::Bench(BenchError::Calibrate(e)) => e.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
