//! One-dimensional conditional densities and CDFs evaluated on a fixed y-grid.
//!
//! [`GridDensity`] and [`GridCdf`] are the currency passed between the initial
//! model, the recalibration step and the interval constructors. Integration is
//! by the trapezoid rule throughout; CDF evaluation between grid points goes
//! through a [`MonotoneSpline`], so every interpolated CDF is a valid CDF.

mod model;
mod spline;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{FixedModel, GaussianModel, InitialModel};
pub use spline::{MonotoneSpline, MONOTONE_SNAP_TOL};

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Default padding on each side of the observed response range, as a fraction of it.
pub const DEFAULT_GRID_PADDING: f64 = 0.1;

/// Tolerance on the CDF endpoints, `F(first) <= tol` and `F(last) >= 1 - tol`.
const CDF_END_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid cdf: {0}")]
    InvalidCdf(String),
    #[error("density has no positive mass")]
    DegenerateDensity,
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("knot values decrease at index {index}")]
    NonMonotoneInput { index: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },
}

/// Strictly increasing, finite response grid with at least three points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct YGrid {
    points: Vec<f64>,
}

impl YGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, GridError> {
        if points.len() < 3 {
            return Err(GridError::InvalidGrid(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GridError::InvalidGrid("non-finite grid point".into()));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GridError::InvalidGrid(format!(
                "not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { points })
    }

    /// `n` equispaced points on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self, GridError> {
        if !(hi > lo) {
            return Err(GridError::InvalidGrid(format!("empty range [{lo}, {hi}]")));
        }
        Self::new(crate::stats::linspace(lo, hi, n))
    }

    /// Equispaced grid over the range of `ys`, widened by `padding` times the
    /// range on each side.
    pub fn spanning(ys: &[f64], n: usize, padding: f64) -> Result<Self, GridError> {
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(GridError::InvalidGrid("no finite responses".into()));
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        Self::uniform(lo - padding * span, hi + padding * span, n)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.first() && y <= self.last()
    }

    /// Trapezoid quadrature weights: `∫ f ≈ Σ w_i f(y_i)`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.points.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = 0.5 * (self.points[i + 1] - self.points[i]);
            w[i] += h;
            w[i + 1] += h;
        }
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.points
            .windows(2)
            .zip(values.windows(2))
            .map(|(y, v)| 0.5 * (y[1] - y[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Mean spacing between grid points.
    pub fn mean_step(&self) -> f64 {
        (self.last() - self.first()) / (self.len() - 1) as f64
    }
}

impl TryFrom<Vec<f64>> for YGrid {
    type Error = GridError;

    fn try_from(points: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<YGrid> for Vec<f64> {
    fn from(grid: YGrid) -> Self {
        grid.points
    }
}

/// Nonnegative density values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: YGrid,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: YGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(GridError::InvalidDensity(format!(
                "value {} at index {i} is negative or non-finite",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &YGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral of the density.
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Piecewise-linear interpolation; zero off the grid.
    pub fn value_at(&self, y: f64) -> f64 {
        linear_interp(self.grid.points(), &self.values, y).unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        let yv: Vec<f64> = self
            .grid
            .points()
            .iter()
            .zip(&self.values)
            .map(|(y, v)| y * v)
            .collect();
        self.grid.integrate(&yv) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let v: Vec<f64> = self
            .grid
            .points()
            .iter()
            .zip(&self.values)
            .map(|(y, d)| (y - m) * (y - m) * d)
            .collect();
        self.grid.integrate(&v) / self.mass()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GridError> {
        write_grid_csv(out, self.grid.points(), &self.values)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, GridError> {
        let (grid, values) = read_grid_csv(input)?;
        Self::new(grid, values)
    }
}

/// Nondecreasing CDF values on a grid, with a monotone spline for evaluation
/// between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    grid: YGrid,
    values: Vec<f64>,
    spline: MonotoneSpline,
}

impl GridCdf {
    pub fn new(grid: YGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values
            .iter()
            .position(|v| !v.is_finite() || *v < -MONOTONE_SNAP_TOL || *v > 1.0 + MONOTONE_SNAP_TOL)
        {
            return Err(GridError::InvalidCdf(format!(
                "value {} at index {i} outside [0, 1]",
                values[i]
            )));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        if values[0] > CDF_END_TOL {
            return Err(GridError::InvalidCdf(format!(
                "first value {} is not near 0",
                values[0]
            )));
        }
        if values[values.len() - 1] < 1.0 - CDF_END_TOL {
            return Err(GridError::InvalidCdf(format!(
                "last value {} is not near 1",
                values[values.len() - 1]
            )));
        }
        let spline = MonotoneSpline::fit(grid.points(), &values).map_err(|e| match e {
            GridError::NonMonotoneInput { index } => {
                GridError::InvalidCdf(format!("decreasing at index {index}"))
            }
            other => other,
        })?;
        let values = spline.knots_y().to_vec();
        Ok(Self {
            grid,
            values,
            spline,
        })
    }

    pub fn grid(&self) -> &YGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spline(&self) -> &MonotoneSpline {
        &self.spline
    }

    /// Spline-interpolated CDF at `y`, clamped to 0 below and 1 above the grid.
    pub fn pit(&self, y: f64) -> f64 {
        if y < self.grid.first() {
            0.0
        } else if y > self.grid.last() {
            1.0
        } else {
            self.spline.eval(y)
        }
    }

    /// Smallest `y` with `F(y) >= p`.
    pub fn invert(&self, p: f64) -> f64 {
        if p >= 1.0 {
            return self.grid.last();
        }
        self.spline.solve_smallest(p)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GridError> {
        write_grid_csv(out, self.grid.points(), &self.values)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, GridError> {
        let (grid, values) = read_grid_csv(input)?;
        Self::new(grid, values)
    }
}

/// Cumulative trapezoid integral of a density, normalized to end at exactly 1.
pub fn cdf_from_density(d: &GridDensity) -> Result<GridCdf, GridError> {
    let points = d.grid.points();
    let mut values = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    values.push(0.0);
    for i in 1..points.len() {
        acc += 0.5 * (points[i] - points[i - 1]) * (d.values[i - 1] + d.values[i]);
        values.push(acc);
    }
    if !(acc > 0.0) {
        return Err(GridError::DegenerateDensity);
    }
    for v in &mut values {
        *v = (*v / acc).clamp(0.0, 1.0);
    }
    let last = values.len() - 1;
    values[last] = 1.0;
    GridCdf::new(d.grid.clone(), values)
}

/// Model CDF at `y` (the probability integral transform of `y`).
pub fn pit(c: &GridCdf, y: f64) -> f64 {
    c.pit(y)
}

/// Quantile of a grid CDF: the smallest `y` on the interpolated CDF with `F(y) >= p`.
pub fn invert_cdf(c: &GridCdf, p: f64) -> f64 {
    c.invert(p)
}

/// Monte Carlo PIT: the fraction of `draws` at or below `y`.
pub fn pit_from_samples(draws: &[f64], y: f64) -> Result<f64, GridError> {
    if draws.is_empty() {
        return Err(GridError::EmptySample);
    }
    let below = draws.iter().filter(|&&d| d <= y).count();
    Ok(below as f64 / draws.len() as f64)
}

/// Clips negative values to zero and rescales to unit trapezoid mass.
pub fn renormalize_density(grid: &YGrid, raw: &[f64]) -> Result<GridDensity, GridError> {
    if raw.len() != grid.len() {
        return Err(GridError::LengthMismatch {
            expected: grid.len(),
            found: raw.len(),
        });
    }
    if raw.iter().any(|v| v.is_nan()) {
        return Err(GridError::InvalidDensity("NaN value".into()));
    }
    let clipped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let mass = grid.integrate(&clipped);
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(GridError::DegenerateDensity);
    }
    let values = clipped.into_iter().map(|v| v / mass).collect();
    GridDensity::new(grid.clone(), values)
}

impl GridDensity {
    pub fn renormalized(&self) -> Result<GridDensity, GridError> {
        renormalize_density(&self.grid, &self.values)
    }
}

/// Gaussian smoothing of a density on its own grid.
///
/// Each grid point's mass is spread with a Gaussian kernel of standard
/// deviation `bandwidth`; kernel mass falling past either end of the grid is
/// reflected back in. Kernel columns are normalized on the grid so the
/// discrete mass is preserved, and the result is renormalized.
pub fn widen_density(d: &GridDensity, bandwidth: f64) -> Result<GridDensity, GridError> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(GridError::InvalidBandwidth(bandwidth));
    }
    let y = d.grid.points();
    let n = y.len();
    let (lo, hi) = (d.grid.first(), d.grid.last());
    let w = d.grid.trapezoid_weights();
    let kernel = |a: f64, b: f64| {
        let u = (a - b) / bandwidth;
        (-0.5 * u * u).exp()
    };
    let mut out = vec![0.0; n];
    let mut column = vec![0.0; n];
    for j in 0..n {
        if d.values[j] == 0.0 {
            continue;
        }
        let mirror_lo = 2.0 * lo - y[j];
        let mirror_hi = 2.0 * hi - y[j];
        let mut norm = 0.0;
        for i in 0..n {
            let k = kernel(y[i], y[j]) + kernel(y[i], mirror_lo) + kernel(y[i], mirror_hi);
            column[i] = k;
            norm += k * w[i];
        }
        if norm <= 0.0 {
            // Kernel narrower than the grid resolution underflowed: keep the mass in place.
            out[j] += d.values[j];
            continue;
        }
        let scale = d.values[j] * w[j] / norm;
        for i in 0..n {
            out[i] += column[i] * scale;
        }
    }
    renormalize_density(&d.grid, &out)
}

/// Linear interpolation of `(xs, ys)` at `x`; `None` off the range.
pub(crate) fn linear_interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if !(x >= xs[0] && x <= xs[n - 1]) {
        return None;
    }
    let i = xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    Some(ys[i] + t * (ys[i + 1] - ys[i]))
}

fn write_grid_csv<W: Write>(out: W, ys: &[f64], values: &[f64]) -> Result<(), GridError> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| GridError::Csv {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(["y", "value"]).map_err(io_err)?;
    for (y, v) in ys.iter().zip(values) {
        w.write_record([format!("{y:.17e}"), format!("{v:.17e}")])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| GridError::Csv {
        row: 0,
        message: e.to_string(),
    })
}

fn read_grid_csv<R: Read>(input: R) -> Result<(YGrid, Vec<f64>), GridError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| GridError::Csv {
        row: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "y" || &headers[1] != "value" {
        return Err(GridError::Csv {
            row: 1,
            message: "expected header `y,value`".into(),
        });
    }
    let mut ys = Vec::new();
    let mut values = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| GridError::Csv {
            row,
            message: e.to_string(),
        })?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| GridError::Csv {
                row,
                message: format!("`{s}`: {e}"),
            })
        };
        ys.push(parse(&record[0])?);
        values.push(parse(&record[1])?);
    }
    Ok((YGrid::new(ys)?, values))
}
