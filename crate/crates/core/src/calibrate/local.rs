//! Local empirical CDF of the PIT values around `x`.
//!
//! `r̂(γ; x) = Σ_i w_i(x) 1{PIT_i ≤ γ}` with weights supported on a
//! neighborhood of `x` in standardized feature space. Monotone in `γ` exactly,
//! and it only uses calibration points near `x`, which the Monte Carlo local
//! test relies on.

use serde::{Deserialize, Serialize};

use super::{feature_moments, Backend, CalibrateError, CalibrationSet, PitCdfModel, PitRegression};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    /// The `k` nearest calibration points.
    Nearest(usize),
    /// All points within this radius (standardized units); falls back to the
    /// single nearest point when the ball is empty.
    Radius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEmpiricalConfig {
    pub neighborhood: Neighborhood,
    #[serde(default)]
    pub weighting: Weighting,
}

impl LocalEmpiricalConfig {
    pub fn nearest(k: usize) -> Self {
        Self {
            neighborhood: Neighborhood::Nearest(k),
            weighting: Weighting::Uniform,
        }
    }

    pub fn radius(bandwidth: f64) -> Self {
        Self {
            neighborhood: Neighborhood::Radius(bandwidth),
            weighting: Weighting::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), CalibrateError> {
        match self.neighborhood {
            Neighborhood::Nearest(0) => Err(CalibrateError::InvalidConfig("k must be at least 1".into())),
            Neighborhood::Radius(h) if !(h > 0.0) || !h.is_finite() => Err(CalibrateError::InvalidConfig(
                format!("bandwidth must be positive, got {h}"),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for LocalEmpiricalConfig {
    fn default() -> Self {
        Self::nearest(250)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalEmpiricalModel {
    config: LocalEmpiricalConfig,
    dim: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Standardized calibration features, row-major.
    z: Vec<f64>,
    pits: Vec<f64>,
}

pub fn fit_local_empirical(
    cal: &CalibrationSet,
    pit_values: &[f64],
    config: LocalEmpiricalConfig,
) -> Result<LocalEmpiricalModel, CalibrateError> {
    config.validate()?;
    if pit_values.len() != cal.len() {
        return Err(CalibrateError::LengthMismatch {
            expected: cal.len(),
            found: pit_values.len(),
        });
    }
    let n = cal.len();
    let needed = match config.neighborhood {
        Neighborhood::Nearest(k) => k,
        Neighborhood::Radius(_) => 1,
    };
    if n < needed {
        return Err(CalibrateError::InsufficientData { needed, available: n });
    }
    if let Some(p) = pit_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CalibrateError::InvalidInput(format!("PIT value {p} outside [0, 1]")));
    }
    let dim = cal.dim();
    let (mean, scale) = feature_moments(cal.features(), dim);
    let z = standardize_rows(cal.features(), dim, &mean, &scale);
    Ok(LocalEmpiricalModel {
        config,
        dim,
        mean,
        scale,
        z,
        pits: pit_values.to_vec(),
    })
}

fn standardize_rows(x: &[f64], dim: usize, mean: &[f64], scale: &[f64]) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    x.chunks_exact(dim)
        .flat_map(|row| (0..dim).map(move |j| (row[j] - mean[j]) / scale[j]))
        .collect()
}

impl LocalEmpiricalModel {
    pub fn config(&self) -> &LocalEmpiricalConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.pits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pits.is_empty()
    }

    /// Same neighborhoods, different PIT values (used for null refits).
    pub fn with_pits(&self, pits: Vec<f64>) -> Result<Self, CalibrateError> {
        if pits.len() != self.pits.len() {
            return Err(CalibrateError::LengthMismatch {
                expected: self.pits.len(),
                found: pits.len(),
            });
        }
        Ok(Self { pits, ..self.clone() })
    }

    fn sq_distances(&self, x: &[f64]) -> Vec<f64> {
        let q: Vec<f64> = (0..self.dim).map(|j| (x[j] - self.mean[j]) / self.scale[j]).collect();
        if self.dim == 0 {
            return vec![0.0; self.pits.len()];
        }
        self.z
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect()
    }

    /// Neighbor indices with normalized weights.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let d2 = self.sq_distances(x);
        let n = d2.len();
        let by_distance = |a: &usize, b: &usize| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b));
        let chosen: Vec<usize> = match self.config.neighborhood {
            Neighborhood::Nearest(k) if k >= n => (0..n).collect(),
            Neighborhood::Nearest(k) => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.select_nth_unstable_by(k - 1, by_distance);
                idx.truncate(k);
                idx
            }
            Neighborhood::Radius(h) => {
                let h2 = h * h;
                let inside: Vec<usize> = (0..n).filter(|&i| d2[i] <= h2).collect();
                if inside.is_empty() {
                    (0..n).min_by(by_distance).into_iter().collect()
                } else {
                    inside
                }
            }
        };
        let raw: Vec<f64> = match self.config.weighting {
            Weighting::Uniform => vec![1.0; chosen.len()],
            Weighting::InverseDistance => chosen.iter().map(|&i| 1.0 / (d2[i].sqrt() + 1e-6)).collect(),
        };
        let total: f64 = raw.iter().sum();
        chosen.into_iter().zip(raw).map(|(i, w)| (i, w / total)).collect()
    }

    /// Sorted PIT values of the neighborhood and their cumulative weights.
    fn local_cdf(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pairs: Vec<(f64, f64)> = self
            .neighbors(x)
            .into_iter()
            .map(|(i, w)| (self.pits[i], w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let (pits, cum) = pairs
            .into_iter()
            .map(|(p, w)| {
                acc += w;
                (p, acc)
            })
            .unzip();
        (pits, cum)
    }
}

fn step_eval(pits: &[f64], cum: &[f64], gamma: f64) -> f64 {
    let idx = pits.partition_point(|&p| p <= gamma);
    if idx == 0 {
        0.0
    } else if idx == pits.len() {
        1.0
    } else {
        cum[idx - 1].min(1.0)
    }
}

impl PitCdfModel for LocalEmpiricalModel {
    fn predict(&self, gamma: f64, x: &[f64]) -> f64 {
        let (pits, cum) = self.local_cdf(x);
        step_eval(&pits, &cum, gamma)
    }

    fn predict_curve(&self, gammas: &[f64], x: &[f64]) -> Vec<f64> {
        let (pits, cum) = self.local_cdf(x);
        gammas.iter().map(|&g| step_eval(&pits, &cum, g)).collect()
    }

    fn backend(&self) -> Backend {
        Backend::LocalEmpirical
    }
}

impl PitRegression for LocalEmpiricalConfig {
    fn fit(
        &self,
        cal: &CalibrationSet,
        pit_values: &[f64],
        _seed: u64,
    ) -> Result<Box<dyn PitCdfModel>, CalibrateError> {
        Ok(Box::new(fit_local_empirical(cal, pit_values, *self)?))
    }

    fn backend(&self) -> Backend {
        Backend::LocalEmpirical
    }
}
