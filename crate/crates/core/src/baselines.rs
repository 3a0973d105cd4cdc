//! Conformal baselines.
//!
//! - [`RegSplit`]: split conformal on absolute residuals of a point regressor
//!   (k-nearest-neighbor mean by default). Constant width in `x`.
//! - [`Dcp`]: distributional conformal prediction with the centered-PIT score
//!   `|F̂(Y|X) − 1/2|` of the initial model.
//!
//! Both use the `⌈(n+1)(1−α)⌉`-th smallest calibration score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{compute_pit_values, feature_moments, CalibrateError, CalibrationSet, PredictionSet, SetKind};
use crate::grid::{GridError, InitialModel};

/// Default neighborhood size of [`KnnMean`].
pub const DEFAULT_KNN_K: usize = 50;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{available} calibration scores are too few for alpha = {alpha} (need {needed})")]
    InsufficientCalibration { needed: usize, available: usize, alpha: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
}

/// Sorted nonconformity scores and the conformal threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalCalibration {
    pub scores: Vec<f64>,
    pub alpha: f64,
    /// One-based rank of the threshold among the sorted scores.
    pub quantile_index: usize,
}

/// `⌈(n+1)(1−α)⌉`, guarded against rounding just above an integer.
pub fn conformal_index(n: usize, alpha: f64) -> usize {
    (((n + 1) as f64) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize
}

impl ConformalCalibration {
    pub fn new(mut scores: Vec<f64>, alpha: f64) -> Result<Self, BaselineError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(BaselineError::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(BaselineError::InvalidInput("non-finite conformal score".into()));
        }
        let n = scores.len();
        let index = conformal_index(n, alpha);
        if index > n {
            return Err(BaselineError::InsufficientCalibration {
                needed: (1.0 / alpha - 1.0 - 1e-9).ceil() as usize,
                available: n,
                alpha,
            });
        }
        scores.sort_by(f64::total_cmp);
        Ok(Self {
            scores,
            alpha,
            quantile_index: index,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.scores[self.quantile_index - 1]
    }
}

/// A point regression `μ̂(x)`.
pub trait PointRegressor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

/// Mean response of the `k` nearest training points in standardized feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnMean {
    k: usize,
    dim: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    z: Vec<f64>,
    ys: Vec<f64>,
}

impl KnnMean {
    pub fn fit(train: &CalibrationSet, k: usize) -> Result<Self, BaselineError> {
        if k == 0 {
            return Err(BaselineError::InvalidInput("k must be at least 1".into()));
        }
        if train.len() < k {
            return Err(BaselineError::InvalidInput(format!(
                "k = {k} exceeds the {} training points",
                train.len()
            )));
        }
        let dim = train.dim();
        let (mean, scale) = feature_moments(train.features(), dim);
        let z = train
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect::<Vec<_>>())
            .collect();
        Ok(Self {
            k,
            dim,
            mean,
            scale,
            z,
            ys: train.ys().to_vec(),
        })
    }
}

impl PointRegressor for KnnMean {
    fn predict(&self, x: &[f64]) -> f64 {
        let q: Vec<f64> = (0..self.dim).map(|j| (x[j] - self.mean[j]) / self.scale[j]).collect();
        let mut d: Vec<(f64, usize)> = (0..self.ys.len())
            .map(|i| {
                let row = &self.z[i * self.dim..(i + 1) * self.dim];
                (row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
        }
        d[..self.k].iter().map(|&(_, i)| self.ys[i]).sum::<f64>() / self.k as f64
    }
}

/// Split-conformal interval `μ̂(x) ± q̂`.
pub struct RegSplit {
    regressor: Box<dyn PointRegressor>,
    conformal: ConformalCalibration,
}

impl RegSplit {
    /// Scores `|Yᵢ − μ̂(Xᵢ)|` of `cal` under an already fitted regressor.
    pub fn calibrate(
        regressor: Box<dyn PointRegressor>,
        cal: &CalibrationSet,
        alpha: f64,
    ) -> Result<Self, BaselineError> {
        let scores = cal.iter().map(|(x, y)| (y - regressor.predict(x)).abs()).collect();
        Ok(Self {
            conformal: ConformalCalibration::new(scores, alpha)?,
            regressor,
        })
    }

    /// Fits a [`KnnMean`] on `train` and calibrates on `cal`.
    pub fn fit_knn(train: &CalibrationSet, cal: &CalibrationSet, k: usize, alpha: f64) -> Result<Self, BaselineError> {
        if train.dim() != cal.dim() {
            return Err(BaselineError::InvalidInput(format!(
                "train has {} features, cal has {}",
                train.dim(),
                cal.dim()
            )));
        }
        Self::calibrate(Box::new(KnnMean::fit(train, k)?), cal, alpha)
    }

    pub fn conformal(&self) -> &ConformalCalibration {
        &self.conformal
    }

    pub fn predict_set(&self, x: &[f64]) -> PredictionSet {
        let mu = self.regressor.predict(x);
        let q = self.conformal.threshold();
        PredictionSet {
            intervals: vec![(mu - q, mu + q)],
            nominal_level: 1.0 - self.conformal.alpha,
            kind: SetKind::Interval,
        }
    }
}

/// One-shot [`RegSplit`] with a k-NN mean regressor.
pub fn reg_split(
    train: &CalibrationSet,
    cal: &CalibrationSet,
    alpha: f64,
    x: &[f64],
) -> Result<PredictionSet, BaselineError> {
    Ok(RegSplit::fit_knn(train, cal, DEFAULT_KNN_K, alpha)?.predict_set(x))
}

/// Distributional conformal prediction with the centered-PIT score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dcp {
    conformal: ConformalCalibration,
}

impl Dcp {
    pub fn fit(initial: &dyn InitialModel, cal: &CalibrationSet, alpha: f64) -> Result<Self, BaselineError> {
        if cal.is_empty() {
            return Err(BaselineError::InvalidInput("empty calibration set".into()));
        }
        let pits = compute_pit_values(initial, cal)?;
        Self::from_pits(&pits, alpha)
    }

    pub fn from_pits(pits: &[f64], alpha: f64) -> Result<Self, BaselineError> {
        let scores = pits.iter().map(|p| (p - 0.5).abs()).collect();
        Ok(Self {
            conformal: ConformalCalibration::new(scores, alpha)?,
        })
    }

    pub fn conformal(&self) -> &ConformalCalibration {
        &self.conformal
    }

    /// `[1/2 − q̂, 1/2 + q̂]` clamped to `[0, 1]`.
    pub fn probability_band(&self) -> (f64, f64) {
        let q = self.conformal.threshold();
        ((0.5 - q).max(0.0), (0.5 + q).min(1.0))
    }

    pub fn predict_set(&self, initial: &dyn InitialModel, x: &[f64]) -> Result<PredictionSet, BaselineError> {
        let cdf = initial.cdf_at(x)?;
        let (lo, hi) = self.probability_band();
        Ok(PredictionSet {
            intervals: vec![(cdf.invert(lo), cdf.invert(hi))],
            nominal_level: 1.0 - self.conformal.alpha,
            kind: SetKind::Interval,
        })
    }
}

/// One-shot [`Dcp`].
pub fn dcp(
    initial: &dyn InitialModel,
    cal: &CalibrationSet,
    alpha: f64,
    x: &[f64],
) -> Result<PredictionSet, BaselineError> {
    Dcp::fit(initial, cal, alpha)?.predict_set(initial, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GaussianModel, YGrid};
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    struct Zero;

    impl PointRegressor for Zero {
        fn predict(&self, _x: &[f64]) -> f64 {
            0.0
        }
    }

    fn set(rows: &[(f64, f64)]) -> CalibrationSet {
        let mut c = CalibrationSet::new(1);
        for &(x, y) in rows {
            c.push(&[x], y).unwrap();
        }
        c
    }

    #[test]
    fn index_arithmetic() {
        assert_eq!(conformal_index(4, 0.2), 4);
        assert_eq!(conformal_index(9, 0.1), 9);
        assert_eq!(conformal_index(99, 0.1), 90);
        assert_eq!(conformal_index(5000, 0.1), 4501);
    }

    #[test]
    fn reg_split_rank_example() {
        let cal = set(&[(0.0, 1.0), (1.0, -2.0), (2.0, 3.0), (3.0, -4.0)]);
        let rs = RegSplit::calibrate(Box::new(Zero), &cal, 0.2).unwrap();
        assert_eq!(rs.conformal().quantile_index, 4);
        assert_eq!(rs.predict_set(&[10.0]).intervals, vec![(-4.0, 4.0)]);
    }

    #[test]
    fn too_few_scores() {
        let cal = set(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]);
        assert!(matches!(
            RegSplit::calibrate(Box::new(Zero), &cal, 0.2),
            Err(BaselineError::InsufficientCalibration { needed: 4, available: 3, .. })
        ));
        assert!(ConformalCalibration::new(vec![1.0; 8], 0.1).is_err());
        assert!(ConformalCalibration::new(vec![1.0; 9], 0.1).is_ok());
    }

    #[test]
    fn dcp_rank_example() {
        let d = Dcp::from_pits(&[0.1, 0.4, 0.6, 0.9], 0.2).unwrap();
        assert!((d.conformal().threshold() - 0.4).abs() < 1e-15);
        let (lo, hi) = d.probability_band();
        assert!((lo - 0.1).abs() < 1e-15 && (hi - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dcp_band_clamps() {
        let d = Dcp::from_pits(&[0.0, 1.0, 0.0, 1.0], 0.2).unwrap();
        assert_eq!(d.probability_band(), (0.0, 1.0));
    }

    #[test]
    fn knn_mean_averages_neighbors() {
        let train = set(&[(0.0, 1.0), (0.1, 3.0), (5.0, 100.0), (5.1, 200.0)]);
        let m = KnnMean::fit(&train, 2).unwrap();
        assert!((m.predict(&[0.05]) - 2.0).abs() < 1e-12);
        assert!((m.predict(&[5.2]) - 150.0).abs() < 1e-12);
        assert!(KnnMean::fit(&train, 5).is_err());
    }

    fn gaussian_rows(n: usize, seed: u64) -> CalibrationSet {
        let mut c = CalibrationSet::new(1);
        for i in 0..n {
            let mut r = rng::stream(rng::child(seed, i as u64));
            let x: f64 = r.random::<f64>() * 2.0 - 1.0;
            let e: f64 = StandardNormal.sample(&mut r);
            c.push(&[x], 2.0 * x + (0.5 + x.abs()) * e).unwrap();
        }
        c
    }

    #[test]
    fn dcp_threshold_under_calibration() {
        // Under calibration the scores are U(0, 1/2), so q̂ ≈ 0.45 at α = 0.1.
        let cal = gaussian_rows(5000, 3);
        let mut r = rng::stream(9);
        let pits: Vec<f64> = (0..5000).map(|_| r.random::<f64>()).collect();
        let q = Dcp::from_pits(&pits, 0.1).unwrap().conformal().threshold();
        assert!((q - 0.45).abs() < 0.01, "{q}");
        assert_eq!(cal.len(), 5000);
    }

    #[test]
    fn marginal_coverage_and_widths() {
        let train = gaussian_rows(2000, 1);
        let cal = gaussian_rows(2000, 2);
        let test = gaussian_rows(20_000, 3);
        let rs = RegSplit::fit_knn(&train, &cal, DEFAULT_KNN_K, 0.1).unwrap();
        let grid = YGrid::uniform(-12.0, 12.0, 801).unwrap();
        let model = GaussianModel::new(grid, 0.0, vec![2.0], 1.0).unwrap();
        let d = Dcp::fit(&model, &cal, 0.1).unwrap();
        let mut hit_rs = 0;
        let mut hit_dcp = 0;
        for (x, y) in test.iter() {
            hit_rs += rs.predict_set(x).contains(y) as usize;
            hit_dcp += d.predict_set(&model, x).unwrap().contains(y) as usize;
        }
        for hits in [hit_rs, hit_dcp] {
            let cov = hits as f64 / test.len() as f64;
            assert!((cov - 0.9).abs() < 0.02, "{cov}");
        }
        let w = |x: f64| rs.predict_set(&[x]).size();
        assert!((w(-0.9) - w(0.3)).abs() < 1e-12);
    }

    #[test]
    fn dcp_width_tracks_initial_spread() {
        struct Hetero(YGrid);
        impl InitialModel for Hetero {
            fn grid(&self) -> &YGrid {
                &self.0
            }
            fn density_at(&self, x: &[f64]) -> Result<crate::grid::GridDensity, GridError> {
                GaussianModel::new(self.0.clone(), 0.0, vec![0.0], 0.5 + x[0].abs())?.density_at(x)
            }
        }
        let model = Hetero(YGrid::uniform(-12.0, 12.0, 801).unwrap());
        let d = Dcp::from_pits(&[0.1, 0.3, 0.5, 0.7, 0.9, 0.2, 0.4, 0.6, 0.8, 0.55], 0.1).unwrap();
        let narrow = d.predict_set(&model, &[0.0]).unwrap().size();
        let wide = d.predict_set(&model, &[1.0]).unwrap().size();
        assert!(wide > 2.0 * narrow);
    }
}
