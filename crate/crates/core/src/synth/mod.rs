//! Synthetic data-generating processes with oracle access.
//!
//! - [`sinh_arcsinh`]: the sinh-arcsinh family and the two misspecification
//!   settings of Example 2 (skewed and kurtotic).
//! - [`two_group`]: Example 1, an unobserved two-group mixture that is
//!   bimodal for `X₁ > 0`.
//! - [`tc`]: a toy tropical-cyclone model, radial-profile trajectories from a
//!   VAR(3) on principal-component increments with intensities on the logit
//!   scale.

pub mod sinh_arcsinh;
pub mod tc;
pub mod two_group;

use rand::RngCore;
use thiserror::Error;

use crate::calibrate::CalibrateError;
use crate::grid::{GridCdf, GridDensity, GridError, InitialModel, YGrid};

pub use sinh_arcsinh::{
    sample_example2, Example2Oracle, Example2Setting, SinhArcsinhParams, EXAMPLE2_INITIAL_SD, EXAMPLE2_X_RANGE,
};
pub use tc::{
    chunk_tc, simulate_tc, tc_summary_features, write_tc_jsonl, ChunkFeatures, ChunkMode, ChunkReport, Storm,
    TcModelConfig, PROFILE_LEN, WINDOW_STEPS,
};
pub use two_group::{sample_example1, TwoGroupConfig, TwoGroupOracle};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("VAR is not stationary: companion spectral radius {spectral_radius:.6} >= 1")]
    NonStationaryVar { spectral_radius: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Exact conditional law `Y | X = x` of a generator.
pub trait OracleDistribution: Send + Sync {
    /// Feature dimension.
    fn dim(&self) -> usize;

    fn cdf(&self, y: f64, x: &[f64]) -> f64;

    fn pdf(&self, y: f64, x: &[f64]) -> f64;

    fn quantile(&self, p: f64, x: &[f64]) -> f64;

    fn sample(&self, x: &[f64], rng: &mut dyn RngCore) -> f64;
}

/// Quantile of a continuous CDF by bracketing and bisection.
pub(crate) fn bisect_quantile(cdf: impl Fn(f64) -> f64, p: f64, start: f64, scale: f64) -> f64 {
    let (mut lo, mut hi) = (start - scale, start + scale);
    let mut step = scale;
    while cdf(lo) > p {
        step *= 2.0;
        lo -= step;
    }
    step = scale;
    while cdf(hi) < p {
        step *= 2.0;
        hi += step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// An oracle used as an initial model: its exact density and CDF on a grid,
/// rescaled to the grid's range.
pub struct OracleModel<O> {
    grid: YGrid,
    oracle: O,
}

impl<O: OracleDistribution> OracleModel<O> {
    pub fn new(grid: YGrid, oracle: O) -> Self {
        Self { grid, oracle }
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }
}

impl<O: OracleDistribution> InitialModel for OracleModel<O> {
    fn grid(&self) -> &YGrid {
        &self.grid
    }

    fn density_at(&self, x: &[f64]) -> Result<GridDensity, GridError> {
        let values = self.grid.points().iter().map(|&y| self.oracle.pdf(y, x)).collect();
        GridDensity::new(self.grid.clone(), values)?.renormalized()
    }

    fn cdf_at(&self, x: &[f64]) -> Result<GridCdf, GridError> {
        let raw: Vec<f64> = self.grid.points().iter().map(|&y| self.oracle.cdf(y, x)).collect();
        let (lo, hi) = (raw[0], raw[raw.len() - 1]);
        if !(hi - lo > 1e-12) {
            return Err(GridError::DegenerateDensity);
        }
        let mut values: Vec<f64> = raw.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
        let last = values.len() - 1;
        values[0] = 0.0;
        values[last] = 1.0;
        GridCdf::new(self.grid.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::compute_pit_values;
    use crate::stats::{ks_p_value, ks_uniform_statistic, normal_cdf};

    #[test]
    fn bisection_recovers_normal_quantiles() {
        for p in [0.01, 0.3, 0.5, 0.975] {
            let q = bisect_quantile(normal_cdf, p, 0.0, 1.0);
            assert!((normal_cdf(q) - p).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_model_pits_are_uniform() {
        let (cal, oracle) = sample_example2(Example2Setting::Skewed, 10_000, 77).unwrap();
        let grid = YGrid::uniform(-40.0, 40.0, 4001).unwrap();
        let model = OracleModel::new(grid, oracle);
        let pits = compute_pit_values(&model, &cal).unwrap();
        let d = ks_uniform_statistic(&pits);
        assert!(ks_p_value(d, pits.len()) > 0.01, "D = {d}");
    }
}
