//! Applying the P-P map: recalibrated distributions, intervals, HPD sets and
//! the estimated transport map.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CalibrateError, PitCdfModel};
use crate::grid::{renormalize_density, GridCdf, GridDensity, GridError, InitialModel, MonotoneSpline};

/// Bisection iteration cap for the HPD density threshold.
const HPD_MAX_ITER: usize = 200;
/// Allowed gap between an HPD set's mass and its nominal level.
const HPD_MASS_TOL: f64 = 0.005;

/// `F̃(y|x) = r̂(F̂(y|x); x)` on the initial model's grid.
#[derive(Debug, Clone)]
pub struct RecalibratedDistribution {
    cdf: GridCdf,
    quantile_spline: MonotoneSpline,
    pdf: GridDensity,
}

impl RecalibratedDistribution {
    pub fn cdf(&self) -> &GridCdf {
        &self.cdf
    }

    pub fn pdf(&self) -> &GridDensity {
        &self.pdf
    }

    pub fn quantile_spline(&self) -> &MonotoneSpline {
        &self.quantile_spline
    }

    pub fn cdf_at(&self, y: f64) -> f64 {
        self.cdf.pit(y)
    }

    pub fn pdf_at(&self, y: f64) -> f64 {
        self.pdf.value_at(y)
    }

    /// `F̃⁻¹(p)`, read off the quantile spline.
    pub fn quantile(&self, p: f64) -> f64 {
        self.quantile_spline.eval(p.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.pdf.mean()
    }

    /// Mass of `set` under the piecewise-linear recalibrated density.
    pub fn mass(&self, set: &PredictionSet) -> f64 {
        set.intervals.iter().map(|&(lo, hi)| linear_mass(&self.pdf, lo, hi)).sum()
    }

    /// CSV with header `y,cdf,pdf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CalibrateError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| CalibrateError::Csv {
            row: 0,
            message: e.to_string(),
        };
        w.write_record(["y", "cdf", "pdf"]).map_err(csv_err)?;
        let points = self.cdf.grid().points();
        for i in 0..points.len() {
            w.write_record([
                format!("{:.17e}", points[i]),
                format!("{:.17e}", self.cdf.values()[i]),
                format!("{:.17e}", self.pdf.values()[i]),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Recalibrates the initial model at `x`.
pub fn recalibrate(
    model: &dyn InitialModel,
    r: &dyn PitCdfModel,
    x: &[f64],
) -> Result<RecalibratedDistribution, CalibrateError> {
    let initial = model.cdf_at(x)?;
    recalibrate_cdf(&initial, r, x)
}

/// Recalibrates an already evaluated initial CDF.
///
/// The composed values are made nondecreasing by a running maximum and their
/// endpoints snapped to 0 and 1. The density is the derivative of the CDF
/// spline, renormalized.
pub fn recalibrate_cdf(
    initial: &GridCdf,
    r: &dyn PitCdfModel,
    x: &[f64],
) -> Result<RecalibratedDistribution, CalibrateError> {
    let mut values = r.predict_curve(initial.values(), x);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CalibrateError::DegenerateRecalibration);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi - lo > 1e-12) {
        return Err(CalibrateError::DegenerateRecalibration);
    }
    let mut running = f64::NEG_INFINITY;
    for v in &mut values {
        running = running.max(v.clamp(0.0, 1.0));
        *v = running;
    }
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 1.0;

    let grid = initial.grid().clone();
    let cdf = GridCdf::new(grid.clone(), values)?;
    let raw_pdf: Vec<f64> = grid.points().iter().map(|&y| cdf.spline().derivative(y)).collect();
    let pdf = renormalize_density(&grid, &raw_pdf)?;
    let quantile_spline = quantile_spline(&cdf)?;
    Ok(RecalibratedDistribution {
        cdf,
        quantile_spline,
        pdf,
    })
}

/// `F̃` as an initial model, so a recalibrated fit can be diagnosed or recalibrated again.
pub struct RecalibratedModel<'a> {
    pub initial: &'a dyn InitialModel,
    pub r: &'a dyn PitCdfModel,
}

impl InitialModel for RecalibratedModel<'_> {
    fn grid(&self) -> &crate::grid::YGrid {
        self.initial.grid()
    }

    fn density_at(&self, x: &[f64]) -> Result<GridDensity, GridError> {
        Ok(self.recalibrated(x)?.pdf)
    }

    fn cdf_at(&self, x: &[f64]) -> Result<GridCdf, GridError> {
        Ok(self.recalibrated(x)?.cdf)
    }
}

impl RecalibratedModel<'_> {
    fn recalibrated(&self, x: &[f64]) -> Result<RecalibratedDistribution, GridError> {
        recalibrate(self.initial, self.r, x).map_err(|e| match e {
            CalibrateError::Grid(g) => g,
            _ => GridError::DegenerateDensity,
        })
    }
}

/// Interpolant of `p ↦ y` through the CDF knots.
///
/// Flat runs of the CDF would give repeated abscissae. The leading run at 0
/// keeps its right end and the trailing run at 1 its left end; an interior run
/// keeps both ends, the right one nudged up in `p`, so the quantile jumps across
/// the zero-density gap.
fn quantile_spline(cdf: &GridCdf) -> Result<MonotoneSpline, CalibrateError> {
    const NUDGE: f64 = 1e-12;
    let ys = cdf.grid().points();
    let ps = cdf.values();
    let n = ps.len();
    let mut kp: Vec<f64> = Vec::with_capacity(n);
    let mut ky: Vec<f64> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ps[j + 1] == ps[i] {
            j += 1;
        }
        let p = ps[i];
        if j == i || p == 1.0 {
            kp.push(p);
            ky.push(ys[i]);
        } else if p == 0.0 {
            kp.push(p);
            ky.push(ys[j]);
        } else {
            kp.push(p);
            ky.push(ys[i]);
            let next = if j + 1 < n { ps[j + 1] } else { f64::INFINITY };
            if p + NUDGE < next {
                kp.push(p + NUDGE);
                ky.push(ys[j]);
            }
        }
        i = j + 1;
    }
    Ok(MonotoneSpline::fit(&kp, &ky)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Interval,
    Hpd,
}

/// A prediction set: sorted, disjoint intervals in response units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub intervals: Vec<(f64, f64)>,
    pub nominal_level: f64,
    pub kind: SetKind,
}

impl PredictionSet {
    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| y >= lo && y <= hi)
    }

    /// Total length.
    pub fn size(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }
}

fn check_alpha(alpha: f64) -> Result<(), CalibrateError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CalibrateError::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Central interval `[F̃⁻¹(α/2), F̃⁻¹(1 − α/2)]`.
pub fn calpit_interval(rd: &RecalibratedDistribution, alpha: f64) -> Result<PredictionSet, CalibrateError> {
    check_alpha(alpha)?;
    Ok(PredictionSet {
        intervals: vec![(rd.quantile(alpha / 2.0), rd.quantile(1.0 - alpha / 2.0))],
        nominal_level: 1.0 - alpha,
        kind: SetKind::Interval,
    })
}

/// Highest-density set of the recalibrated density.
pub fn calpit_hpd(rd: &RecalibratedDistribution, alpha: f64) -> Result<PredictionSet, CalibrateError> {
    hpd_set(&rd.pdf, alpha)
}

/// Mass of `[lo, hi]` under the piecewise-linear interpolant of `d`.
fn linear_mass(d: &GridDensity, lo: f64, hi: f64) -> f64 {
    let y = d.grid().points();
    let f = d.values();
    let lo = lo.max(y[0]);
    let hi = hi.min(y[y.len() - 1]);
    if !(hi > lo) {
        return 0.0;
    }
    let mut mass = 0.0;
    for i in 0..y.len() - 1 {
        let a = y[i].max(lo);
        let b = y[i + 1].min(hi);
        if b > a {
            let at = |t: f64| f[i] + (f[i + 1] - f[i]) * (t - y[i]) / (y[i + 1] - y[i]);
            mass += 0.5 * (b - a) * (at(a) + at(b));
        }
    }
    mass
}

/// The part of cell `[a, b]` where the linear density from `fa` to `fb` is at
/// least `t`.
fn cell_piece(a: f64, b: f64, fa: f64, fb: f64, t: f64) -> Option<(f64, f64, f64)> {
    let piece = match (fa >= t, fb >= t) {
        (true, true) => (a, b),
        (false, false) => return None,
        (true, false) => (a, a + (t - fa) / (fb - fa) * (b - a)),
        (false, true) => (a + (t - fa) / (fb - fa) * (b - a), b),
    };
    let (p, q) = piece;
    if !(q > p) {
        return None;
    }
    let at = |s: f64| fa + (fb - fa) * (s - a) / (b - a);
    Some((p, q, 0.5 * (q - p) * (at(p) + at(q))))
}

fn superlevel_mass(y: &[f64], f: &[f64], t: f64) -> f64 {
    (0..y.len() - 1)
        .filter_map(|i| cell_piece(y[i], y[i + 1], f[i], f[i + 1], t))
        .map(|(_, _, m)| m)
        .sum()
}

/// Highest-density set `{y : f(y) ≥ t}` with mass `1 − α`.
///
/// The threshold is found by bisection; components are refined by linear
/// interpolation of the density within grid cells. When a flat stretch of the
/// density sits exactly at the threshold, its cells are included from left to
/// right until the target mass is reached.
pub fn hpd_set(density: &GridDensity, alpha: f64) -> Result<PredictionSet, CalibrateError> {
    check_alpha(alpha)?;
    let y = density.grid().points();
    let f = density.values();
    let n = y.len();
    let total = superlevel_mass(y, f, 0.0);
    if !(total > 0.0) {
        return Err(CalibrateError::HpdSearchFailed);
    }
    let target = (1.0 - alpha) * total;

    let fmax = f.iter().cloned().fold(0.0, f64::max);
    let (mut t_lo, mut t_hi) = (0.0, fmax);
    let mut converged = false;
    for _ in 0..HPD_MAX_ITER {
        let mid = 0.5 * (t_lo + t_hi);
        if !(mid > t_lo && mid < t_hi) {
            converged = true;
            break;
        }
        let m = superlevel_mass(y, f, mid);
        if m >= target {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
        if (superlevel_mass(y, f, t_lo) - target).abs() <= 1e-4 * total {
            converged = true;
            break;
        }
    }

    // Cells whose density is tied with the threshold (within a relative 1e-9)
    // are held back and added from left to right until the target is reached.
    let eps = 1e-9 * fmax;
    let tied = |v: f64| (v - t_lo).abs() <= eps;
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut plateau = Vec::new();
    let mut mass = 0.0;
    for i in 0..n - 1 {
        if tied(f[i]) && tied(f[i + 1]) {
            plateau.push(i);
        } else if let Some((p, q, m)) = cell_piece(y[i], y[i + 1], f[i], f[i + 1], t_lo + eps) {
            pieces.push((p, q));
            mass += m;
        }
    }
    if !converged && plateau.is_empty() {
        return Err(CalibrateError::HpdSearchFailed);
    }
    for i in plateau {
        if mass >= target {
            break;
        }
        let cell = 0.5 * (y[i + 1] - y[i]) * (f[i] + f[i + 1]);
        if mass + cell <= target {
            pieces.push((y[i], y[i + 1]));
            mass += cell;
        } else {
            let frac = (target - mass) / cell;
            pieces.push((y[i], y[i] + frac * (y[i + 1] - y[i])));
            mass = target;
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (p, q) in pieces {
        match intervals.last_mut() {
            Some(last) if p <= last.1 => last.1 = last.1.max(q),
            _ => intervals.push((p, q)),
        }
    }
    let set = PredictionSet {
        intervals,
        nominal_level: 1.0 - alpha,
        kind: SetKind::Hpd,
    };
    let mass: f64 = set.intervals.iter().map(|&(a, b)| linear_mass(density, a, b)).sum();
    if set.intervals.is_empty() || (mass - target).abs() > HPD_MASS_TOL * total {
        return Err(CalibrateError::HpdSearchFailed);
    }
    Ok(set)
}

/// Estimated optimal transport map `T̂(y) = F̃⁻¹(F̂(y))`.
pub fn estimated_ot(rd: &RecalibratedDistribution, initial_cdf: &GridCdf, y: f64) -> f64 {
    rd.quantile(initial_cdf.pit(y))
}
