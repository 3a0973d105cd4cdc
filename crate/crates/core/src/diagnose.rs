//! Calibration diagnostics.
//!
//! - Amortized local P-P curves: `γ ↦ r̂(γ; x)` at a fixed `x`, optionally with a
//!   Monte Carlo null band.
//! - The local coverage test of `H₀: r(γ; x) = γ`, with statistic
//!   `T(x) = |G|⁻¹ Σ_{γ∈G} (r̂(γ; x) − γ)²` and a p-value computed from `B` refits
//!   on uniform pseudo-PIT values.
//! - The CDE loss `E_x[∫ f̃(y|x)² dy] − 2 E_{x,y}[f̃(Y|X)]`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{CalibrateError, CalibrationSet, PitCdfModel, PitRegression};
use crate::grid::GridDensity;
use crate::rng;
use crate::stats::linspace;

/// Number of γ values in the default test grid.
pub const DEFAULT_TEST_GRID: usize = 21;
/// Default band level `η` (the band has level `1 − η`).
pub const DEFAULT_BAND_ETA: f64 = 0.05;
/// Smallest number of null replicates for which a band is reported.
pub const MIN_BAND_REPLICATES: usize = 20;

#[derive(Debug, Error)]
pub enum DiagnoseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("need at least {needed} null replicates, have {found}")]
    TooFewReplicates { needed: usize, found: usize },
    #[error("null refit {b} failed: {source}")]
    Refit { b: usize, source: CalibrateError },
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// `G`: 21 equispaced values in `[0.05, 0.95]`.
pub fn default_test_gammas() -> Vec<f64> {
    linspace(0.05, 0.95, DEFAULT_TEST_GRID)
}

fn check_gammas(gammas: &[f64]) -> Result<(), DiagnoseError> {
    if gammas.is_empty() {
        return Err(DiagnoseError::InvalidInput("empty gamma grid".into()));
    }
    if gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) || gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DiagnoseError::InvalidInput(
            "gammas must be strictly increasing in (0, 1)".into(),
        ));
    }
    Ok(())
}

/// A local P-P curve at one feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlpCurve {
    pub x: Vec<f64>,
    pub gammas: Vec<f64>,
    pub r_values: Vec<f64>,
    pub band_lo: Option<Vec<f64>>,
    pub band_hi: Option<Vec<f64>>,
}

impl AlpCurve {
    pub fn with_band(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.band_lo = Some(lo);
        self.band_hi = Some(hi);
        self
    }

    /// CSV with header `gamma,r,lo,hi`; band columns are empty without a band.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiagnoseError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DiagnoseError::Csv(e.to_string());
        w.write_record(["gamma", "r", "lo", "hi"]).map_err(err)?;
        for i in 0..self.gammas.len() {
            let band = |b: &Option<Vec<f64>>| b.as_ref().map(|v| format!("{:.17e}", v[i])).unwrap_or_default();
            w.write_record([
                format!("{:.17e}", self.gammas[i]),
                format!("{:.17e}", self.r_values[i]),
                band(&self.band_lo),
                band(&self.band_hi),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn alp_curve(r: &dyn PitCdfModel, x: &[f64], gammas: &[f64]) -> Result<AlpCurve, DiagnoseError> {
    check_gammas(gammas)?;
    Ok(AlpCurve {
        x: x.to_vec(),
        gammas: gammas.to_vec(),
        r_values: r.predict_curve(gammas, x),
        band_lo: None,
        band_hi: None,
    })
}

/// `T(x)`, the mean squared distance of the local P-P curve from the diagonal on `gammas`.
pub fn local_test_statistic(r: &dyn PitCdfModel, x: &[f64], gammas: &[f64]) -> f64 {
    statistic_of(&r.predict_curve(gammas, x), gammas)
}

fn statistic_of(curve: &[f64], gammas: &[f64]) -> f64 {
    curve.iter().zip(gammas).map(|(r, g)| (r - g) * (r - g)).sum::<f64>() / gammas.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTestResult {
    pub x: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub n_mc: usize,
}

/// The `B` null refits of the local coverage test.
///
/// Refit `b` replaces every PIT value by an independent `U(0, 1)` draw and
/// fits the same regression again. The refits do not depend on `x`, so one
/// set serves every evaluation point.
pub struct LocalCoverageTest {
    nulls: Vec<Box<dyn PitCdfModel>>,
}

impl LocalCoverageTest {
    pub fn fit(
        regression: &dyn PitRegression,
        cal: &CalibrationSet,
        b: usize,
        seed: u64,
    ) -> Result<Self, DiagnoseError> {
        if b == 0 {
            return Err(DiagnoseError::InvalidInput("B must be at least 1".into()));
        }
        let uniform_seed = rng::derive(seed, "null-pit");
        let nulls = (0..b)
            .into_par_iter()
            .map(|bi| {
                let pits: Vec<f64> = (0..cal.len())
                    .map(|i| rng::uniform_open(uniform_seed, bi as u64, i as u64))
                    .collect();
                regression
                    .fit(cal, &pits, rng::child(seed, bi as u64))
                    .map_err(|source| DiagnoseError::Refit { b: bi, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { nulls })
    }

    /// Wraps already fitted null models.
    pub fn from_null_models(nulls: Vec<Box<dyn PitCdfModel>>) -> Result<Self, DiagnoseError> {
        if nulls.is_empty() {
            return Err(DiagnoseError::InvalidInput("B must be at least 1".into()));
        }
        Ok(Self { nulls })
    }

    pub fn n_mc(&self) -> usize {
        self.nulls.len()
    }

    pub fn null_statistics(&self, x: &[f64], gammas: &[f64]) -> Vec<f64> {
        self.nulls.iter().map(|m| local_test_statistic(m.as_ref(), x, gammas)).collect()
    }

    /// `p(x) = B⁻¹ Σ_b 1{T(x) < T⁽ᵇ⁾(x)}`.
    pub fn p_value(
        &self,
        observed: &dyn PitCdfModel,
        x: &[f64],
        gammas: &[f64],
    ) -> Result<LocalTestResult, DiagnoseError> {
        check_gammas(gammas)?;
        let statistic = local_test_statistic(observed, x, gammas);
        let exceed = self
            .null_statistics(x, gammas)
            .iter()
            .filter(|&&t| statistic < t)
            .count();
        Ok(LocalTestResult {
            x: x.to_vec(),
            statistic,
            p_value: exceed as f64 / self.n_mc() as f64,
            n_mc: self.n_mc(),
        })
    }

    /// Per-γ null band of level `1 − η`.
    ///
    /// With `B` sorted null values per γ, `lo` is the `(⌊(η/2)B⌋ + 1)`-th smallest
    /// and `hi` the `⌈(1 − η/2)B⌉`-th smallest.
    pub fn band(&self, x: &[f64], gammas: &[f64], eta: f64) -> Result<(Vec<f64>, Vec<f64>), DiagnoseError> {
        check_gammas(gammas)?;
        if !(eta > 0.0 && eta < 1.0) {
            return Err(DiagnoseError::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
        }
        let b = self.n_mc();
        if b < MIN_BAND_REPLICATES {
            return Err(DiagnoseError::TooFewReplicates {
                needed: MIN_BAND_REPLICATES,
                found: b,
            });
        }
        let (lo_rank, hi_rank) = band_ranks(b, eta);
        let curves: Vec<Vec<f64>> = self.nulls.iter().map(|m| m.predict_curve(gammas, x)).collect();
        let mut lo = Vec::with_capacity(gammas.len());
        let mut hi = Vec::with_capacity(gammas.len());
        let mut column = vec![0.0; b];
        for g in 0..gammas.len() {
            for (c, curve) in column.iter_mut().zip(&curves) {
                *c = curve[g];
            }
            column.sort_by(f64::total_cmp);
            lo.push(column[lo_rank - 1]);
            hi.push(column[hi_rank - 1]);
        }
        Ok((lo, hi))
    }
}

/// One-based ranks of the band ends among `b` sorted values.
pub fn band_ranks(b: usize, eta: f64) -> (usize, usize) {
    let bf = b as f64;
    let lo = ((eta / 2.0) * bf + 1e-9).floor() as usize + 1;
    let hi = ((1.0 - eta / 2.0) * bf - 1e-9).ceil() as usize;
    (lo.min(b), hi.clamp(lo.min(b), b))
}

/// Fits the observed PIT-CDF and `B` null refits with `regression`, then tests at `x`.
pub fn mc_p_value(
    regression: &dyn PitRegression,
    cal: &CalibrationSet,
    pit_values: &[f64],
    x: &[f64],
    b: usize,
    gammas: &[f64],
    seed: u64,
) -> Result<LocalTestResult, DiagnoseError> {
    let observed = regression.fit(cal, pit_values, rng::derive(seed, "observed"))?;
    let test = LocalCoverageTest::fit(regression, cal, b, seed)?;
    test.p_value(observed.as_ref(), x, gammas)
}

/// Null band at `x` from `B` refits with `regression`.
pub fn mc_confidence_band(
    regression: &dyn PitRegression,
    cal: &CalibrationSet,
    x: &[f64],
    b: usize,
    gammas: &[f64],
    eta: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), DiagnoseError> {
    if b < MIN_BAND_REPLICATES {
        return Err(DiagnoseError::TooFewReplicates {
            needed: MIN_BAND_REPLICATES,
            found: b,
        });
    }
    LocalCoverageTest::fit(regression, cal, b, seed)?.band(x, gammas, eta)
}

/// Counts of PIT values in `bins` equal-width bins of `[0, 1]`.
pub fn pit_histogram(pits: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins.max(1)];
    let n = counts.len();
    for &p in pits {
        let i = ((p.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1);
        counts[i] += 1;
    }
    counts
}

/// CDE loss, up to a constant that does not depend on the estimate.
///
/// `∫ f̃²` uses the trapezoid rule on each density's grid; `f̃(y)` is linearly
/// interpolated.
pub fn cde_loss(pdfs: &[GridDensity], test_ys: &[f64]) -> Result<f64, DiagnoseError> {
    if pdfs.len() != test_ys.len() {
        return Err(DiagnoseError::LengthMismatch {
            expected: pdfs.len(),
            found: test_ys.len(),
        });
    }
    if pdfs.is_empty() {
        return Err(DiagnoseError::InvalidInput("no test points".into()));
    }
    let n = pdfs.len() as f64;
    let (sq, at_y) = pdfs.iter().zip(test_ys).fold((0.0, 0.0), |(sq, at), (d, &y)| {
        let squared: Vec<f64> = d.values().iter().map(|v| v * v).collect();
        (sq + d.grid().integrate(&squared), at + d.value_at(y))
    });
    Ok(sq / n - 2.0 * at_y / n)
}
