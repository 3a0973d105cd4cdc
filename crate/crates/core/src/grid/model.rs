use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{cdf_from_density, widen_density, GridCdf, GridDensity, GridError, YGrid};
use crate::calibrate::CalibrationSet;
use crate::stats::{normal_cdf, normal_pdf};

/// An initial conditional density estimate `f̂(y|x)` evaluated on a grid.
pub trait InitialModel: Send + Sync {
    fn grid(&self) -> &YGrid;

    fn density_at(&self, x: &[f64]) -> Result<GridDensity, GridError>;

    fn cdf_at(&self, x: &[f64]) -> Result<GridCdf, GridError> {
        cdf_from_density(&self.density_at(x)?)
    }

    /// Forward-simulated draws from `F̂(·|x)` for models whose PIT must be
    /// approximated by sampling. `row` keys the draw stream.
    fn draws_at(&self, _x: &[f64], _row: u64) -> Option<Vec<f64>> {
        None
    }

    fn is_sample_based(&self) -> bool {
        false
    }
}

/// A density that does not depend on `x` (uniform or a marginal estimate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedModel {
    grid: YGrid,
    values: Vec<f64>,
}

impl FixedModel {
    pub fn uniform(grid: YGrid) -> Self {
        let width = grid.last() - grid.first();
        let values = vec![1.0 / width; grid.len()];
        Self { grid, values }
    }

    /// Histogram of `ys` on the grid, smoothed with a Gaussian kernel of
    /// `bandwidth` (Silverman's rule when `None`).
    pub fn marginal(grid: YGrid, ys: &[f64], bandwidth: Option<f64>) -> Result<Self, GridError> {
        if ys.is_empty() {
            return Err(GridError::EmptySample);
        }
        let n = grid.len();
        let points = grid.points();
        let mut counts = vec![0.0; n];
        for &y in ys {
            if !grid.contains(y) {
                continue;
            }
            let i = points.partition_point(|&p| p <= y).saturating_sub(1).min(n - 2);
            let t = (y - points[i]) / (points[i + 1] - points[i]);
            counts[i] += 1.0 - t;
            counts[i + 1] += t;
        }
        let w = grid.trapezoid_weights();
        let raw: Vec<f64> = counts.iter().zip(&w).map(|(c, w)| c / w).collect();
        let histogram = GridDensity::new(grid.clone(), raw)?;
        let bw = bandwidth.unwrap_or_else(|| {
            let sd = crate::stats::variance(ys).sqrt().max(grid.mean_step());
            1.06 * sd * (ys.len() as f64).powf(-0.2)
        });
        let smooth = widen_density(&histogram, bw.max(grid.mean_step()))?;
        Ok(Self {
            grid,
            values: smooth.values().to_vec(),
        })
    }

    pub fn density(&self) -> Result<GridDensity, GridError> {
        GridDensity::new(self.grid.clone(), self.values.clone())?.renormalized()
    }
}

impl InitialModel for FixedModel {
    fn grid(&self) -> &YGrid {
        &self.grid
    }

    fn density_at(&self, _x: &[f64]) -> Result<GridDensity, GridError> {
        self.density()
    }
}

/// Gaussian conditional model `N(intercept + coef·x, sd²)`, truncated to the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianModel {
    pub grid: YGrid,
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub sd: f64,
}

impl GaussianModel {
    pub fn new(grid: YGrid, intercept: f64, coef: Vec<f64>, sd: f64) -> Result<Self, GridError> {
        if !(sd > 0.0) {
            return Err(GridError::InvalidDensity(format!("sd must be positive, got {sd}")));
        }
        Ok(Self {
            grid,
            intercept,
            coef,
            sd,
        })
    }

    /// Ridge regression of `y` on standardized features; `sd` is the training
    /// residual RMS times `dispersion` (values below 1 give an under-dispersed model).
    pub fn fit_ridge(
        grid: YGrid,
        data: &CalibrationSet,
        lambda: f64,
        dispersion: f64,
    ) -> Result<Self, GridError> {
        let n = data.len();
        let d = data.dim();
        if n < 2 {
            return Err(GridError::EmptySample);
        }
        let (mean, scale) = data.feature_moments();
        let y_mean = crate::stats::mean(data.ys());
        let z = DMatrix::from_fn(n, d, |i, j| (data.row(i)[j] - mean[j]) / scale[j]);
        let yc = DVector::from_iterator(n, data.ys().iter().map(|y| y - y_mean));
        let mut gram = z.transpose() * &z;
        for j in 0..d {
            gram[(j, j)] += lambda;
        }
        let rhs = z.transpose() * yc;
        let beta = gram
            .cholesky()
            .ok_or_else(|| GridError::InvalidDensity("ridge system is singular".into()))?
            .solve(&rhs);
        let coef: Vec<f64> = (0..d).map(|j| beta[j] / scale[j]).collect();
        let intercept = y_mean - (0..d).map(|j| coef[j] * mean[j]).sum::<f64>();
        let rss: f64 = (0..n)
            .map(|i| {
                let pred = intercept + dot(&coef, data.row(i));
                (data.ys()[i] - pred).powi(2)
            })
            .sum();
        let sd = (rss / n as f64).sqrt() * dispersion;
        Self::new(grid, intercept, coef, sd)
    }

    pub fn mean_at(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.coef, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

impl InitialModel for GaussianModel {
    fn grid(&self) -> &YGrid {
        &self.grid
    }

    fn density_at(&self, x: &[f64]) -> Result<GridDensity, GridError> {
        let mu = self.mean_at(x);
        let values = self
            .grid
            .points()
            .iter()
            .map(|&y| normal_pdf((y - mu) / self.sd) / self.sd)
            .collect();
        GridDensity::new(self.grid.clone(), values)?.renormalized()
    }

    /// Exact normal CDF on the grid, rescaled to run from 0 to 1 across it.
    fn cdf_at(&self, x: &[f64]) -> Result<GridCdf, GridError> {
        let mu = self.mean_at(x);
        let raw: Vec<f64> = self
            .grid
            .points()
            .iter()
            .map(|&y| normal_cdf((y - mu) / self.sd))
            .collect();
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

    #[test]
    fn uniform_model_is_flat_unit_mass() {
        let m = FixedModel::uniform(YGrid::uniform(0.0, 2.0, 5).unwrap());
        let d = m.density_at(&[]).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert!(d.values().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn marginal_model_tracks_the_sample() {
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::rng::stream(9);
        let normal = Normal::new(2.0, 1.0).unwrap();
        let ys: Vec<f64> = (0..5000).map(|_| normal.sample(&mut rng)).collect();
        let grid = YGrid::spanning(&ys, 201, 0.1).unwrap();
        let m = FixedModel::marginal(grid, &ys, None).unwrap();
        let d = m.density_at(&[0.0]).unwrap();
        assert!((d.mean() - 2.0).abs() < 0.05);
        assert!((d.variance() - 1.0).abs() < 0.1, "{}", d.variance());
    }

    #[test]
    fn gaussian_cdf_hits_its_quantiles() {
        let grid = YGrid::uniform(-10.0, 10.0, 401).unwrap();
        let m = GaussianModel::new(grid, 1.0, vec![2.0], 1.5).unwrap();
        let c = m.cdf_at(&[0.5]).unwrap();
        // Truncated to the grid: (Φ(z) − Φ(z_lo)) / (Φ(z_hi) − Φ(z_lo)).
        let (lo, hi) = (normal_cdf(-12.0 / 1.5), normal_cdf(8.0 / 1.5));
        assert!((c.pit(2.0) - (0.5 - lo) / (hi - lo)).abs() < 1e-12);
        assert!((c.invert(0.975) - (2.0 + 1.5 * 1.959_964)).abs() < 1e-3);
    }

    #[test]
    fn ridge_recovers_linear_trend() {
        let mut cal = CalibrationSet::new(2);
        for i in 0..200 {
            let a = i as f64 / 20.0;
            let b = ((i * 7) % 13) as f64;
            let noise = if i % 2 == 0 { 0.5 } else { -0.5 };
            cal.push(&[a, b], 1.0 + 3.0 * a - 0.5 * b + noise).unwrap();
        }
        let grid = YGrid::spanning(cal.ys(), 101, 0.1).unwrap();
        let m = GaussianModel::fit_ridge(grid, &cal, 1e-6, 1.0).unwrap();
        assert!((m.coef[0] - 3.0).abs() < 0.01);
        assert!((m.coef[1] + 0.5).abs() < 0.01);
        assert!((m.sd - 0.5).abs() < 0.01);
        let halved = GaussianModel::fit_ridge(m.grid.clone(), &cal, 1e-6, 0.5).unwrap();
        assert!((halved.sd - 0.25).abs() < 0.01);
    }
}
