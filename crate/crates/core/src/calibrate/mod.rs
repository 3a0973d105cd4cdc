//! Learning the PIT-CDF `r(γ; x)` and using it as a P-P map.
//!
//! The pipeline is:
//!
//! 1. [`compute_pit_values`]: `PIT_i = F̂(Y_i | X_i)` on the calibration set.
//! 2. [`augment`]: draw `γ_ij ~ U(0,1)` for `j = 1..K` and record
//!    `W_ij = 1{PIT_i ≤ γ_ij}`.
//! 3. Regress `W` on `(x, γ)` with a model monotone in `γ`: either the
//!    [`MonotoneNet`] trained on the augmented set, or the
//!    [`LocalEmpiricalModel`], which evaluates the local empirical CDF of the
//!    PIT values directly and needs no augmentation.
//! 4. [`recalibrate`]: `F̃(y|x) = r̂(F̂(y|x); x)`, plus intervals, HPD sets and
//!    the estimated transport map.

mod local;
mod net;
mod recal;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{pit_from_samples, GridError, InitialModel};
use crate::rng;

pub use local::{fit_local_empirical, LocalEmpiricalConfig, LocalEmpiricalModel, Neighborhood, Weighting};
pub use net::{fit_monotone_net, MonotoneNet, MonotoneNetConfig, NetRegression, TrainingReport};
pub use recal::{
    calpit_hpd, calpit_interval, estimated_ot, hpd_set, recalibrate, recalibrate_cdf, PredictionSet,
    RecalibratedDistribution, RecalibratedModel, SetKind,
};

/// Default oversampling factor K.
pub const DEFAULT_K_FACTOR: usize = 50;

/// Version written into fitted-model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("initial model failed at calibration row {index}: {source}")]
    ModelEval { index: usize, source: GridError },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("need at least {needed} calibration points, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("recalibrated CDF is constant")]
    DegenerateRecalibration,
    #[error("HPD threshold search did not converge")]
    HpdSearchFailed,
    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CalibrateError {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CalibrateError::TrainingDiverged { .. }
                | CalibrateError::DegenerateRecalibration
                | CalibrateError::HpdSearchFailed
                | CalibrateError::Grid(GridError::DegenerateDensity)
        )
    }
}

/// Calibration data `(x_i, y_i)` with features stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl CalibrationSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            x: Vec::with_capacity(n * dim),
            y: Vec::with_capacity(n),
        }
    }

    /// Builds a set from row-major features.
    pub fn from_parts(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self, CalibrateError> {
        if x.len() != dim * y.len() {
            return Err(CalibrateError::LengthMismatch {
                expected: dim * y.len(),
                found: x.len(),
            });
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(CalibrateError::InvalidInput(format!(
                "non-finite value at flat index {i}"
            )));
        }
        Ok(Self { dim, x, y })
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<(), CalibrateError> {
        if x.len() != self.dim {
            return Err(CalibrateError::LengthMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(CalibrateError::InvalidInput(format!(
                "non-finite entry in row {}",
                self.y.len()
            )));
        }
        self.x.extend_from_slice(x);
        self.y.push(y);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.y[i]))
    }

    /// Subset by row indices, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, rows.len());
        for &i in rows {
            out.x.extend_from_slice(self.row(i));
            out.y.push(self.y[i]);
        }
        out
    }

    /// Per-feature mean and standard deviation (zero deviations replaced by 1).
    pub fn feature_moments(&self) -> (Vec<f64>, Vec<f64>) {
        feature_moments(&self.x, self.dim)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CalibrateError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header).map_err(csv_err(1))?;
        for (i, (x, y)) in self.iter().enumerate() {
            let mut record: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
            record.push(format!("{y:.17e}"));
            w.write_record(&record).map_err(csv_err(i + 2))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `x0,...,x{d-1},y` format; errors carry the 1-based file line.
    /// Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, CalibrateError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = r.headers().map_err(csv_err(1))?.clone();
        let d = headers.len().checked_sub(1).ok_or(CalibrateError::Csv {
            row: 1,
            message: "empty header".into(),
        })?;
        for (j, h) in headers.iter().enumerate() {
            let expected = if j == d { "y".to_string() } else { format!("x{j}") };
            if h.trim() != expected {
                return Err(CalibrateError::Csv {
                    row: 1,
                    message: format!("column {j} is `{h}`, expected `{expected}`"),
                });
            }
        }
        let mut set = Self::new(d);
        let mut record = csv::StringRecord::new();
        loop {
            let more = r.read_record(&mut record).map_err(|e| {
                let row = e.position().map_or(0, |p| p.line() as usize);
                csv_err(row)(e)
            })?;
            if !more {
                break;
            }
            let row = record.position().map_or(0, |p| p.line() as usize);
            let mut values = Vec::with_capacity(d + 1);
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|e| CalibrateError::Csv {
                    row,
                    message: format!("`{field}`: {e}"),
                })?;
                if !v.is_finite() {
                    return Err(CalibrateError::Csv {
                        row,
                        message: format!("non-finite value `{field}`"),
                    });
                }
                values.push(v);
            }
            if values.len() != d + 1 {
                return Err(CalibrateError::Csv {
                    row,
                    message: format!("expected {} fields, found {}", d + 1, values.len()),
                });
            }
            set.push(&values[..d], values[d])?;
        }
        Ok(set)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self, CalibrateError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_err(row: usize) -> impl Fn(csv::Error) -> CalibrateError {
    move |e| CalibrateError::Csv {
        row,
        message: e.to_string(),
    }
}

pub(crate) fn feature_moments(x: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = if dim == 0 { 0 } else { x.len() / dim };
    let mut mean = vec![0.0; dim];
    let mut scale = vec![1.0; dim];
    if n == 0 {
        return (mean, scale);
    }
    for row in x.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; dim];
    for row in x.chunks_exact(dim) {
        for j in 0..dim {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    for j in 0..dim {
        let sd = (var[j] / n as f64).sqrt();
        scale[j] = if sd > 1e-12 { sd } else { 1.0 };
    }
    (mean, scale)
}

/// PIT values `F̂(Y_i | X_i)` of the calibration responses under the initial model.
pub fn compute_pit_values(
    model: &dyn InitialModel,
    cal: &CalibrationSet,
) -> Result<Vec<f64>, CalibrateError> {
    cal.iter()
        .enumerate()
        .map(|(index, (x, y))| {
            if model.is_sample_based() {
                let draws = model.draws_at(x, index as u64).ok_or(CalibrateError::ModelEval {
                    index,
                    source: GridError::EmptySample,
                })?;
                pit_from_samples(&draws, y).map_err(|source| CalibrateError::ModelEval { index, source })
            } else {
                let cdf = model
                    .cdf_at(x)
                    .map_err(|source| CalibrateError::ModelEval { index, source })?;
                Ok(cdf.pit(y))
            }
        })
        .collect()
}

/// The augmented calibration set `{(X_i, γ_ij, W_ij)}`.
///
/// Row `r` belongs to calibration point `r / K`; features are stored once per
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCalibrationSet {
    dim: usize,
    x: Vec<f64>,
    pit: Vec<f64>,
    gamma: Vec<f64>,
    w: Vec<bool>,
    k_factor: usize,
}

impl AugmentedCalibrationSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_factor(&self) -> usize {
        self.k_factor
    }

    /// Number of calibration points `n`.
    pub fn n_points(&self) -> usize {
        self.pit.len()
    }

    /// Number of rows `n × K`.
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn point_features(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_pit(&self, i: usize) -> f64 {
        self.pit[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    pub fn indicators(&self) -> &[bool] {
        &self.w
    }

    /// Rows `(x, γ, w)` in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64, bool)> + '_ {
        (0..self.len()).map(move |r| (self.point_features(r / self.k_factor), self.gamma[r], self.w[r]))
    }

    /// Debug export in the `x0,...,x{d-1},gamma,w` format.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CalibrateError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("gamma".into());
        header.push("w".into());
        w.write_record(&header).map_err(csv_err(1))?;
        for (i, (x, gamma, ind)) in self.rows().enumerate() {
            let mut record: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
            record.push(format!("{gamma:.17e}"));
            record.push(if ind { "1".into() } else { "0".into() });
            w.write_record(&record).map_err(csv_err(i + 2))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Oversamples each calibration point `k_factor` times with fresh `γ ~ U(0,1)`.
///
/// `γ_ij` is a pure function of `(seed, i, j)`.
pub fn augment(
    cal: &CalibrationSet,
    pit_values: &[f64],
    k_factor: usize,
    seed: u64,
) -> Result<AugmentedCalibrationSet, CalibrateError> {
    if pit_values.len() != cal.len() {
        return Err(CalibrateError::LengthMismatch {
            expected: cal.len(),
            found: pit_values.len(),
        });
    }
    if k_factor == 0 {
        return Err(CalibrateError::InvalidConfig("oversampling factor must be at least 1".into()));
    }
    let n = cal.len();
    let mut gamma = Vec::with_capacity(n * k_factor);
    let mut w = Vec::with_capacity(n * k_factor);
    for (i, &p) in pit_values.iter().enumerate() {
        for j in 0..k_factor {
            let g = rng::uniform_open(seed, i as u64, j as u64);
            gamma.push(g);
            w.push(p <= g);
        }
    }
    Ok(AugmentedCalibrationSet {
        dim: cal.dim(),
        x: cal.features().to_vec(),
        pit: pit_values.to_vec(),
        gamma,
        w,
        k_factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Identity,
    LocalEmpirical,
    MonotoneNet,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Identity => "identity",
            Backend::LocalEmpirical => "local-empirical",
            Backend::MonotoneNet => "monotone-net",
        })
    }
}

/// A fitted PIT-CDF `r̂(γ; x)`: nondecreasing in `γ`, valued in `[0, 1]`.
pub trait PitCdfModel: Send + Sync {
    fn predict(&self, gamma: f64, x: &[f64]) -> f64;

    /// `r̂(γ; x)` for every `γ` in `gammas` (any order).
    fn predict_curve(&self, gammas: &[f64], x: &[f64]) -> Vec<f64> {
        gammas.iter().map(|&g| self.predict(g, x)).collect()
    }

    fn backend(&self) -> Backend;
}

/// The diagonal map `r(γ; x) = γ` of a perfectly calibrated model.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct IdentityMap;

impl PitCdfModel for IdentityMap {
    fn predict(&self, gamma: f64, _x: &[f64]) -> f64 {
        gamma.clamp(0.0, 1.0)
    }

    fn backend(&self) -> Backend {
        Backend::Identity
    }
}

/// A procedure that fits a PIT-CDF from calibration features and PIT values.
///
/// Used both for the main fit and for the Monte Carlo null refits of the
/// local coverage test.
pub trait PitRegression: Send + Sync {
    fn fit(
        &self,
        cal: &CalibrationSet,
        pit_values: &[f64],
        seed: u64,
    ) -> Result<Box<dyn PitCdfModel>, CalibrateError>;

    fn backend(&self) -> Backend;
}

/// Serializable fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum FittedModel {
    Identity,
    LocalEmpirical(LocalEmpiricalModel),
    MonotoneNet(MonotoneNet),
}

impl FittedModel {
    pub fn as_model(&self) -> &dyn PitCdfModel {
        match self {
            FittedModel::Identity => &IdentityMap,
            FittedModel::LocalEmpirical(m) => m,
            FittedModel::MonotoneNet(m) => m,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: FittedModel,
}

impl FittedModel {
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), CalibrateError> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, CalibrateError> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CalibrateError::InvalidInput("missing format_version".into()))?;
        if version != u64::from(MODEL_FORMAT_VERSION) {
            return Err(CalibrateError::UnsupportedFormat(version as u32));
        }
        let file: ModelFile = serde_json::from_value(value)?;
        Ok(file.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FixedModel, GaussianModel, YGrid};

    struct PointMassBelow {
        grid: YGrid,
    }

    impl InitialModel for PointMassBelow {
        fn grid(&self) -> &YGrid {
            &self.grid
        }

        fn density_at(&self, _x: &[f64]) -> Result<crate::grid::GridDensity, GridError> {
            let mut v = vec![0.0; self.grid.len()];
            v[0] = 1.0;
            crate::grid::GridDensity::new(self.grid.clone(), v)?.renormalized()
        }
    }

    struct Sampled;

    impl InitialModel for Sampled {
        fn grid(&self) -> &YGrid {
            unreachable!()
        }

        fn density_at(&self, _x: &[f64]) -> Result<crate::grid::GridDensity, GridError> {
            unreachable!()
        }

        fn draws_at(&self, x: &[f64], _row: u64) -> Option<Vec<f64>> {
            Some(vec![x[0] - 1.0, x[0], x[0] + 1.0, x[0] + 2.0])
        }

        fn is_sample_based(&self) -> bool {
            true
        }
    }

    fn small_set() -> CalibrationSet {
        let mut cal = CalibrationSet::new(1);
        cal.push(&[0.0], 0.5).unwrap();
        cal.push(&[1.0], 3.0).unwrap();
        cal
    }

    #[test]
    fn pit_under_point_mass_below_is_one() {
        let grid = YGrid::uniform(-10.0, 10.0, 201).unwrap();
        let mut cal = CalibrationSet::new(1);
        for i in 0..20 {
            cal.push(&[i as f64], 1.0 + i as f64 / 4.0).unwrap();
        }
        let pits = compute_pit_values(&PointMassBelow { grid }, &cal).unwrap();
        assert!(pits.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn sample_based_models_use_draws() {
        let pits = compute_pit_values(&Sampled, &small_set()).unwrap();
        assert_eq!(pits, vec![0.5, 1.0]);
    }

    #[test]
    fn model_failure_reports_row() {
        let grid = YGrid::uniform(-1.0, 1.0, 11).unwrap();
        // The mean of the second row sits far outside the grid.
        let model = GaussianModel::new(grid, 0.0, vec![100.0], 0.01).unwrap();
        match compute_pit_values(&model, &small_set()) {
            Err(CalibrateError::ModelEval { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn augment_small() {
        let aug = augment(&small_set(), &[0.3, 0.8], 3, 1).unwrap();
        assert_eq!(aug.len(), 6);
        for (r, (x, g, w)) in aug.rows().enumerate() {
            let i = r / 3;
            assert_eq!(x, small_set().row(i));
            assert!(g > 0.0 && g < 1.0);
            assert_eq!(w, [0.3, 0.8][i] <= g);
        }
    }

    #[test]
    fn zero_pit_always_below_gamma() {
        let aug = augment(&small_set(), &[0.0, 0.0], 25, 4).unwrap();
        assert!(aug.indicators().iter().all(|&w| w));
    }

    #[test]
    fn augment_mean_indicator_is_half_under_uniform_pits() {
        let n = 1000;
        let mut cal = CalibrationSet::new(1);
        let pits: Vec<f64> = (0..n).map(|i| rng::uniform_open(99, i, 0)).collect();
        for i in 0..n {
            cal.push(&[i as f64], 0.0).unwrap();
        }
        let aug = augment(&cal, &pits, 50, 2).unwrap();
        let mean = aug.indicators().iter().filter(|&&w| w).count() as f64 / aug.len() as f64;
        // P(U1 <= U2) = 1/2.
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn augment_is_deterministic_and_checks_lengths() {
        let a = augment(&small_set(), &[0.2, 0.4], 5, 7).unwrap();
        let b = augment(&small_set(), &[0.2, 0.4], 5, 7).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            augment(&small_set(), &[0.2], 5, 7),
            Err(CalibrateError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn augmented_csv_header() {
        let aug = augment(&small_set(), &[0.2, 0.4], 2, 7).unwrap();
        let mut buf = Vec::new();
        aug.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,gamma,w\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn calibration_csv_round_trip_and_errors() {
        let mut cal = CalibrationSet::new(2);
        cal.push(&[0.1, -2.0], 3.5).unwrap();
        cal.push(&[1.0 / 3.0, 4.0], -1.25).unwrap();
        let mut buf = Vec::new();
        cal.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x0,x1,y\n"));
        assert_eq!(CalibrationSet::read_csv(buf.as_slice()).unwrap(), cal);

        let bad = "x0,y\n1,2\n3,oops\n";
        match CalibrationSet::read_csv(bad.as_bytes()) {
            Err(CalibrateError::Csv { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let bad_header = "a,y\n1,2\n";
        assert!(CalibrationSet::read_csv(bad_header.as_bytes()).is_err());
        let short = "x0,x1,y\n1,2\n";
        assert!(CalibrationSet::read_csv(short.as_bytes()).is_err());
    }

    #[test]
    fn calibration_csv_skips_comments_and_keeps_line_numbers() {
        let text = "# calpit 0.1.0 seed=7\nx0,y\n1,2\n# note\n3,4\n5,x\n";
        match CalibrationSet::read_csv(text.as_bytes()) {
            Err(CalibrateError::Csv { row, .. }) => assert_eq!(row, 6),
            other => panic!("{other:?}"),
        }
        let ok = CalibrationSet::read_csv("# header note\nx0,y\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(ok.ys(), &[2.0, 4.0]);
    }

    #[test]
    fn uniform_initial_model_gives_rank_pits() {
        let grid = YGrid::uniform(0.0, 10.0, 101).unwrap();
        let model = FixedModel::uniform(grid);
        let mut cal = CalibrationSet::new(1);
        cal.push(&[0.0], 2.5).unwrap();
        let pits = compute_pit_values(&model, &cal).unwrap();
        assert!((pits[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn model_file_rejects_unknown_version() {
        let text = r#"{"format_version": 99, "backend": "identity"}"#;
        assert!(matches!(
            FittedModel::read_json(text.as_bytes()),
            Err(CalibrateError::UnsupportedFormat(99))
        ));
        let mut buf = Vec::new();
        FittedModel::Identity.write_json(&mut buf).unwrap();
        let back = FittedModel::read_json(buf.as_slice()).unwrap();
        assert_eq!(back.as_model().predict(0.3, &[]), 0.3);
    }
}
