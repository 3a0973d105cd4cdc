//! Monte Carlo conditional-coverage benchmark.
//!
//! For each test point `x`, a set method is scored by the fraction of oracle
//! draws `Y ~ F(·|x)` that fall in its set. Coverage is pooled over `R` data
//! realizations of `M` draws each and classified against the nominal level with
//! the two-standard-deviation rule, `SD = sqrt(nominal·α / (M·R))`.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{BaselineError, Dcp, RegSplit, DEFAULT_KNN_K};
use crate::calibrate::{
    calpit_hpd, calpit_interval, compute_pit_values, fit_local_empirical, recalibrate, CalibrateError, CalibrationSet,
    FittedModel,
    LocalEmpiricalConfig, MonotoneNetConfig, NetRegression, PitCdfModel, PitRegression, PredictionSet, SetKind,
    DEFAULT_K_FACTOR,
};
use crate::grid::{FixedModel, GaussianModel, GridError, InitialModel, YGrid};
use crate::rng;
use crate::stats::linspace;
use crate::synth::{
    sample_example1, sample_example2, Example2Oracle, Example2Setting, OracleDistribution, SynthError,
    TwoGroupConfig, EXAMPLE2_X_RANGE,
};

/// Version of the report JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid recipe field '{field}': {message}")]
    Config { field: String, message: String },
    #[error("test point {point}: {source}")]
    AtPoint { point: usize, source: Box<BenchError> },
    #[error("method {method} failed: {source}")]
    Method { method: String, source: Box<BenchError> },
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        BenchError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn is_numerical(&self) -> bool {
        match self {
            BenchError::Calibrate(e) => e.is_numerical(),
            BenchError::Baseline(BaselineError::Calibrate(e)) => e.is_numerical(),
            BenchError::Grid(GridError::DegenerateDensity) => true,
            BenchError::AtPoint { source, .. } | BenchError::Method { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Under,
    Correct,
    Over,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Under => "under",
            Classification::Correct => "correct",
            Classification::Over => "over",
        }
    }
}

/// Two-SD rule with `M_eff = m · realizations` pooled draws.
pub fn classify_coverage(empirical: f64, nominal: f64, m: usize, realizations: usize) -> Classification {
    let m_eff = (m.max(1) * realizations.max(1)) as f64;
    let sd = (nominal * (1.0 - nominal) / m_eff).sqrt();
    let delta = empirical - nominal;
    if delta.abs() <= 2.0 * sd {
        Classification::Correct
    } else if delta < 0.0 {
        Classification::Under
    } else {
        Classification::Over
    }
}

/// Anything that produces a prediction set at a feature vector.
pub trait SetMethod: Send + Sync {
    fn predict_set(&self, x: &[f64]) -> Result<PredictionSet, BenchError>;
}

/// Empirical coverage and set size at one test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoverage {
    pub coverage: f64,
    pub set_size: f64,
}

/// Coverage of `method` at each test point over `m` oracle draws.
///
/// Draws at point `i` come from the stream `child(seed, i)`, so two methods
/// evaluated with the same seed see the same responses.
pub fn conditional_coverage(
    method: &dyn SetMethod,
    oracle: &dyn OracleDistribution,
    test_xs: &[Vec<f64>],
    m: usize,
    seed: u64,
) -> Result<Vec<PointCoverage>, BenchError> {
    test_xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let set = method.predict_set(x).map_err(|e| BenchError::AtPoint {
                point: i,
                source: Box::new(e),
            })?;
            let mut r = rng::stream(rng::child(seed, i as u64));
            let hits = (0..m).filter(|_| set.contains(oracle.sample(x, &mut r))).count();
            Ok(PointCoverage {
                coverage: if m == 0 { 0.0 } else { hits as f64 / m as f64 },
                set_size: set.size(),
            })
        })
        .collect()
}

struct CalPitMethod<'a> {
    initial: &'a dyn InitialModel,
    r: &'a dyn PitCdfModel,
    alpha: f64,
    hpd: bool,
}

impl SetMethod for CalPitMethod<'_> {
    fn predict_set(&self, x: &[f64]) -> Result<PredictionSet, BenchError> {
        let rd = recalibrate(self.initial, self.r, x)?;
        Ok(if self.hpd {
            calpit_hpd(&rd, self.alpha)?
        } else {
            calpit_interval(&rd, self.alpha)?
        })
    }
}

/// Central interval of an initial model, without recalibration.
pub struct InitialInterval<'a> {
    pub model: &'a dyn InitialModel,
    pub alpha: f64,
}

impl SetMethod for InitialInterval<'_> {
    fn predict_set(&self, x: &[f64]) -> Result<PredictionSet, BenchError> {
        let cdf = self.model.cdf_at(x)?;
        Ok(PredictionSet {
            intervals: vec![(cdf.invert(self.alpha / 2.0), cdf.invert(1.0 - self.alpha / 2.0))],
            nominal_level: 1.0 - self.alpha,
            kind: SetKind::Interval,
        })
    }
}

/// Central interval of the true law.
pub struct OracleInterval<'a> {
    pub oracle: &'a dyn OracleDistribution,
    pub alpha: f64,
}

impl SetMethod for OracleInterval<'_> {
    fn predict_set(&self, x: &[f64]) -> Result<PredictionSet, BenchError> {
        Ok(PredictionSet {
            intervals: vec![(
                self.oracle.quantile(self.alpha / 2.0, x),
                self.oracle.quantile(1.0 - self.alpha / 2.0, x),
            )],
            nominal_level: 1.0 - self.alpha,
            kind: SetKind::Interval,
        })
    }
}

struct DcpMethod<'a> {
    initial: &'a dyn InitialModel,
    dcp: Dcp,
}

impl SetMethod for DcpMethod<'_> {
    fn predict_set(&self, x: &[f64]) -> Result<PredictionSet, BenchError> {
        Ok(self.dcp.predict_set(self.initial, x)?)
    }
}

impl SetMethod for RegSplit {
    fn predict_set(&self, x: &[f64]) -> Result<PredictionSet, BenchError> {
        Ok(RegSplit::predict_set(self, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleKind {
    Ex1,
    Ex2Skewed,
    Ex2Kurtotic,
}

impl ExampleKind {
    pub fn dim(&self) -> usize {
        match self {
            ExampleKind::Ex1 => 2,
            _ => 1,
        }
    }

    fn setting(&self) -> Option<Example2Setting> {
        match self {
            ExampleKind::Ex1 => None,
            ExampleKind::Ex2Skewed => Some(Example2Setting::Skewed),
            ExampleKind::Ex2Kurtotic => Some(Example2Setting::Kurtotic),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    CalpitInt,
    CalpitHpd,
    /// The initial model's own central interval.
    Initial,
    Dcp,
    RegSplit,
    Oracle,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::CalpitInt => "calpit-int",
            MethodKind::CalpitHpd => "calpit-hpd",
            MethodKind::Initial => "initial",
            MethodKind::Dcp => "dcp",
            MethodKind::RegSplit => "reg-split",
            MethodKind::Oracle => "oracle",
        }
    }

    fn is_calpit(&self) -> bool {
        matches!(self, MethodKind::CalpitInt | MethodKind::CalpitHpd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Uniform on the response grid.
    Uniform,
    /// Ridge-regression Gaussian fitted on the training half.
    GaussianFit,
    /// Kernel estimate of the marginal of the training responses.
    Marginal,
    /// The model prescribed by the example: `N(x, 2²)` for Example 2, uniform for Example 1.
    Example,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub ridge_lambda: f64,
    /// Multiplier on the fitted Gaussian standard deviation.
    pub dispersion: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            kind: InitialKind::Example,
            ridge_lambda: 1e-3,
            dispersion: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Net,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub k_factor: usize,
    pub net: MonotoneNetConfig,
    pub local: LocalEmpiricalConfig,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            kind: BackendKind::Net,
            k_factor: DEFAULT_K_FACTOR,
            net: MonotoneNetConfig::default(),
            local: LocalEmpiricalConfig::default(),
        }
    }
}

impl BackendSpec {
    /// Fits the backend and returns it in serializable form.
    pub fn fit_model(&self, cal: &CalibrationSet, pit_values: &[f64], seed: u64) -> Result<FittedModel, CalibrateError> {
        Ok(match self.kind {
            BackendKind::Net => FittedModel::MonotoneNet(
                NetRegression {
                    config: self.net.clone(),
                    k_factor: self.k_factor,
                }
                .fit_net(cal, pit_values, seed)?,
            ),
            BackendKind::Local => FittedModel::LocalEmpirical(fit_local_empirical(cal, pit_values, self.local)?),
        })
    }

    pub fn regression(&self) -> Box<dyn PitRegression> {
        match self.kind {
            BackendKind::Net => Box::new(NetRegression {
                config: self.net.clone(),
                k_factor: self.k_factor,
            }),
            BackendKind::Local => Box::new(self.local),
        }
    }
}

/// Response grid `[lo, hi]` with `points` equispaced values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<YGrid, BenchError> {
        YGrid::uniform(self.lo, self.hi, self.points).map_err(|e| BenchError::config("y_grid", e.to_string()))
    }
}

/// A complete, serializable benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Recipe {
    pub example: ExampleKind,
    pub two_group: TwoGroupConfig,
    pub methods: Vec<MethodKind>,
    pub initial: InitialSpec,
    pub backend: BackendSpec,
    /// Training sample for the initial model and the reg-split regressor.
    pub n_train: usize,
    /// Calibration sample.
    pub n_cal: usize,
    pub alpha: f64,
    pub realizations: usize,
    pub mc_draws: usize,
    /// Points per axis of the test lattice (41 for 1-D, 30 for 2-D when absent).
    pub grid_size: Option<usize>,
    /// Explicit test points, replacing the lattice.
    pub test_xs: Option<Vec<Vec<f64>>>,
    pub y_grid: Option<GridSpec>,
    pub knn_k: usize,
    pub seed: u64,
    /// Record wall-clock time in the report summary.
    pub timing: bool,
}

impl Default for Recipe {
    fn default() -> Self {
        Self {
            example: ExampleKind::Ex2Skewed,
            two_group: TwoGroupConfig::default(),
            methods: vec![MethodKind::CalpitInt],
            initial: InitialSpec::default(),
            backend: BackendSpec::default(),
            n_train: 0,
            n_cal: 10_000,
            alpha: 0.1,
            realizations: 10,
            mc_draws: 1000,
            grid_size: None,
            test_xs: None,
            y_grid: None,
            knn_k: DEFAULT_KNN_K,
            seed: 0,
            timing: false,
        }
    }
}

impl Recipe {
    /// The reduced preset (`R = 3`, `M = 300`).
    pub fn quick(mut self) -> Self {
        self.realizations = 3;
        self.mc_draws = 300;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.methods.is_empty() {
            return Err(BenchError::config("methods", "at least one method is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BenchError::config("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.realizations == 0 {
            return Err(BenchError::config("realizations", "must be at least 1"));
        }
        if self.mc_draws == 0 {
            return Err(BenchError::config("mc_draws", "must be at least 1"));
        }
        if self.n_cal == 0 {
            return Err(BenchError::config("n_cal", "must be at least 1"));
        }
        if self.needs_training() && self.n_train < 2 {
            return Err(BenchError::config(
                "n_train",
                "a training sample is required by the initial model or reg-split",
            ));
        }
        if self.grid_size == Some(0) {
            return Err(BenchError::config("grid_size", "must be at least 1"));
        }
        if let Some(xs) = &self.test_xs {
            let d = self.example.dim();
            if xs.is_empty() || xs.iter().any(|x| x.len() != d) {
                return Err(BenchError::config("test_xs", format!("need nonempty points of dimension {d}")));
            }
        }
        if self.initial.dispersion <= 0.0 {
            return Err(BenchError::config("initial.dispersion", "must be positive"));
        }
        if self.example == ExampleKind::Ex1 {
            self.two_group
                .validate()
                .map_err(|e| BenchError::config("two_group", e.to_string()))?;
        }
        match self.backend.kind {
            BackendKind::Net => self.backend.net.validate(),
            BackendKind::Local => self.backend.local.validate(),
        }
        .map_err(|e| BenchError::config("backend", e.to_string()))?;
        Ok(())
    }

    fn needs_training(&self) -> bool {
        matches!(self.initial.kind, InitialKind::GaussianFit | InitialKind::Marginal)
            && self.methods.iter().any(|m| !matches!(m, MethodKind::Oracle | MethodKind::RegSplit))
            || self.methods.contains(&MethodKind::RegSplit)
    }

    pub fn y_grid(&self) -> GridSpec {
        self.y_grid.unwrap_or(GridSpec {
            lo: -25.0,
            hi: 25.0,
            points: 1001,
        })
    }

    /// The test points: `test_xs` if given, else a lattice over the feature range.
    pub fn test_points(&self) -> Vec<Vec<f64>> {
        if let Some(xs) = &self.test_xs {
            return xs.clone();
        }
        match self.example {
            ExampleKind::Ex1 => {
                let (lo, hi) = self.two_group.x_range;
                let axis = linspace(lo, hi, self.grid_size.unwrap_or(30));
                axis.iter()
                    .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
                    .collect()
            }
            _ => linspace(EXAMPLE2_X_RANGE.0, EXAMPLE2_X_RANGE.1, self.grid_size.unwrap_or(41))
                .into_iter()
                .map(|x| vec![x])
                .collect(),
        }
    }

    fn oracle(&self) -> Result<Box<dyn OracleDistribution>, BenchError> {
        Ok(match self.example.setting() {
            None => Box::new(crate::synth::TwoGroupOracle::new(self.two_group.clone())?),
            Some(s) => Box::new(Example2Oracle::new(s)),
        })
    }

    fn sample(&self, n: usize, seed: u64) -> Result<CalibrationSet, BenchError> {
        Ok(match self.example.setting() {
            None => sample_example1(&self.two_group, n, seed)?.0,
            Some(s) => sample_example2(s, n, seed)?.0,
        })
    }

    fn initial_model(&self, grid: &YGrid, train: Option<&CalibrationSet>) -> Result<Box<dyn InitialModel>, BenchError> {
        let need = || train.ok_or_else(|| BenchError::config("n_train", "the initial model needs training data"));
        Ok(match (self.initial.kind, self.example.setting()) {
            (InitialKind::Uniform, _) | (InitialKind::Example, None) => Box::new(FixedModel::uniform(grid.clone())),
            (InitialKind::Example, Some(_)) => Box::new(Example2Oracle::initial_model(grid.clone())?),
            (InitialKind::GaussianFit, _) => Box::new(GaussianModel::fit_ridge(
                grid.clone(),
                need()?,
                self.initial.ridge_lambda,
                self.initial.dispersion,
            )?),
            (InitialKind::Marginal, _) => Box::new(FixedModel::marginal(grid.clone(), need()?.ys(), None)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: Vec<f64>,
    pub nominal: f64,
    pub empirical: f64,
    pub classification: Classification,
    pub mean_set_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub proportion_under: f64,
    pub proportion_correct: f64,
    pub proportion_over: f64,
    pub mean_size: f64,
    pub runtime_seconds: Option<f64>,
    pub config: Recipe,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub method: MethodKind,
    pub records: Vec<PointRecord>,
    pub summary: ReportSummary,
}

impl CoverageReport {
    /// Builds records and summary from pooled per-point coverage and mean set size.
    pub fn from_pooled(
        method: MethodKind,
        recipe: &Recipe,
        xs: &[Vec<f64>],
        pooled: &[PointCoverage],
        runtime_seconds: Option<f64>,
    ) -> Self {
        let nominal = 1.0 - recipe.alpha;
        let records: Vec<PointRecord> = xs
            .iter()
            .zip(pooled)
            .map(|(x, p)| PointRecord {
                x: x.clone(),
                nominal,
                empirical: p.coverage,
                classification: classify_coverage(p.coverage, nominal, recipe.mc_draws, recipe.realizations),
                mean_set_size: p.set_size,
            })
            .collect();
        let n = records.len() as f64;
        let count = |c: Classification| records.iter().filter(|r| r.classification == c).count();
        let (under, correct) = (count(Classification::Under), count(Classification::Correct));
        let over = records.len() - under - correct;
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            method,
            summary: ReportSummary {
                proportion_under: under as f64 / n,
                proportion_correct: correct as f64 / n,
                proportion_over: over as f64 / n,
                mean_size: records.iter().map(|r| r.mean_set_size).sum::<f64>() / n,
                runtime_seconds,
                config: recipe.clone(),
                seed: recipe.seed,
            },
            records,
        }
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), BenchError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// CSV with header `x0,x1,empirical,classification,set_size`; `x1` is empty for 1-D examples.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| BenchError::Csv(e.to_string());
        w.write_record(["x0", "x1", "empirical", "classification", "set_size"])
            .map_err(err)?;
        for r in &self.records {
            let coord = |j: usize| r.x.get(j).map(|v| format!("{v:.17e}")).unwrap_or_default();
            w.write_record([
                coord(0),
                coord(1),
                format!("{:.17e}", r.empirical),
                r.classification.as_str().to_string(),
                format!("{:.17e}", r.mean_set_size),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every method of `recipe` on the same data realizations and test points.
///
/// Realization `r` draws its training and calibration samples from
/// `child(derive(seed, "realization"), r)`; oracle draws at test point `i` are
/// shared by all methods.
pub fn run_experiment(recipe: &Recipe) -> Result<Vec<CoverageReport>, BenchError> {
    recipe.validate()?;
    let start = Instant::now();
    let xs = recipe.test_points();
    let grid = recipe.y_grid().build()?;
    let oracle = recipe.oracle()?;
    let regression = recipe.backend.regression();
    let k = recipe.methods.len();
    let mut sums = vec![vec![(0.0, 0.0); xs.len()]; k];

    for r in 0..recipe.realizations {
        let seed_r = rng::child(rng::derive(recipe.seed, "realization"), r as u64);
        let train = if recipe.n_train > 0 {
            Some(recipe.sample(recipe.n_train, rng::derive(seed_r, "train"))?)
        } else {
            None
        };
        let cal = recipe.sample(recipe.n_cal, rng::derive(seed_r, "cal"))?;
        let uses_initial = recipe
            .methods
            .iter()
            .any(|m| !matches!(m, MethodKind::Oracle | MethodKind::RegSplit));
        let initial = if uses_initial {
            Some(recipe.initial_model(&grid, train.as_ref())?)
        } else {
            None
        };
        let pits = match &initial {
            Some(model) if recipe.methods.iter().any(|m| m.is_calpit() || *m == MethodKind::Dcp) => {
                Some(compute_pit_values(model.as_ref(), &cal)?)
            }
            _ => None,
        };
        let fitted = match &pits {
            Some(p) if recipe.methods.iter().any(MethodKind::is_calpit) => {
                Some(regression.fit(&cal, p, rng::derive(seed_r, "calpit"))?)
            }
            _ => None,
        };
        let mc_seed = rng::child(rng::derive(recipe.seed, "mc"), r as u64);

        for (mi, &method) in recipe.methods.iter().enumerate() {
            let built: Box<dyn SetMethod + '_> = match method {
                MethodKind::CalpitInt | MethodKind::CalpitHpd => Box::new(CalPitMethod {
                    initial: initial.as_deref().expect("initial model built"),
                    r: fitted.as_deref().expect("PIT-CDF fitted"),
                    alpha: recipe.alpha,
                    hpd: method == MethodKind::CalpitHpd,
                }),
                MethodKind::Initial => Box::new(InitialInterval {
                    model: initial.as_deref().expect("initial model built"),
                    alpha: recipe.alpha,
                }),
                MethodKind::Dcp => Box::new(DcpMethod {
                    initial: initial.as_deref().expect("initial model built"),
                    dcp: Dcp::from_pits(pits.as_deref().expect("PIT values computed"), recipe.alpha)?,
                }),
                MethodKind::RegSplit => Box::new(RegSplit::fit_knn(
                    train.as_ref().expect("training sample drawn"),
                    &cal,
                    recipe.knn_k,
                    recipe.alpha,
                )?),
                MethodKind::Oracle => Box::new(OracleInterval {
                    oracle: oracle.as_ref(),
                    alpha: recipe.alpha,
                }),
            };
            let cov = conditional_coverage(built.as_ref(), oracle.as_ref(), &xs, recipe.mc_draws, mc_seed).map_err(
                |e| BenchError::Method {
                    method: method.name().into(),
                    source: Box::new(e),
                },
            )?;
            for (acc, c) in sums[mi].iter_mut().zip(&cov) {
                acc.0 += c.coverage;
                acc.1 += c.set_size;
            }
        }
    }

    let runtime = recipe.timing.then(|| start.elapsed().as_secs_f64());
    let rf = recipe.realizations as f64;
    Ok(recipe
        .methods
        .iter()
        .zip(&sums)
        .map(|(&method, s)| {
            let pooled: Vec<PointCoverage> = s
                .iter()
                .map(|&(c, z)| PointCoverage {
                    coverage: c / rf,
                    set_size: z / rf,
                })
                .collect();
            CoverageReport::from_pooled(method, recipe, &xs, &pooled, runtime)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TwoGroupOracle;

    struct Fixed(Vec<(f64, f64)>);

    impl SetMethod for Fixed {
        fn predict_set(&self, _x: &[f64]) -> Result<PredictionSet, BenchError> {
            Ok(PredictionSet {
                intervals: self.0.clone(),
                nominal_level: 0.9,
                kind: SetKind::Interval,
            })
        }
    }

    #[test]
    fn classification_examples() {
        // SD = sqrt(0.9 · 0.1 / 1000) = 0.009487.
        assert_eq!(classify_coverage(0.905, 0.9, 1000, 1), Classification::Correct);
        assert_eq!(classify_coverage(0.85, 0.9, 1000, 1), Classification::Under);
        assert_eq!(classify_coverage(0.95, 0.9, 1000, 1), Classification::Over);
        assert_eq!(classify_coverage(0.9, 0.9, 1000, 1), Classification::Correct);
        assert_eq!(classify_coverage(0.918, 0.9, 1000, 1), Classification::Correct);
        assert_eq!(classify_coverage(0.92, 0.9, 1000, 1), Classification::Over);
        // Pooling ten realizations shrinks the band.
        assert_eq!(classify_coverage(0.91, 0.9, 1000, 10), Classification::Over);
    }

    #[test]
    fn classification_is_monotone_in_distance() {
        let mut left_correct = true;
        let mut right_correct = true;
        for i in 0..=200 {
            let d = i as f64 * 0.0005;
            let lo = classify_coverage(0.9 - d, 0.9, 1000, 1) == Classification::Correct;
            let hi = classify_coverage(0.9 + d, 0.9, 1000, 1) == Classification::Correct;
            assert!(left_correct || !lo);
            assert!(right_correct || !hi);
            left_correct = lo;
            right_correct = hi;
        }
    }

    #[test]
    fn trivial_sets() {
        let o = TwoGroupOracle::new(TwoGroupConfig::default()).unwrap();
        let xs = vec![vec![1.0, 0.0], vec![-3.0, 2.0]];
        let full = conditional_coverage(&Fixed(vec![(f64::NEG_INFINITY, f64::INFINITY)]), &o, &xs, 500, 1).unwrap();
        assert!(full.iter().all(|c| c.coverage == 1.0));
        let empty = conditional_coverage(&Fixed(vec![]), &o, &xs, 500, 1).unwrap();
        assert!(empty.iter().all(|c| c.coverage == 0.0 && c.set_size == 0.0));
    }

    #[test]
    fn oracle_interval_is_binomial() {
        let o = Example2Oracle::new(Example2Setting::Kurtotic);
        let xs: Vec<Vec<f64>> = [-1.0, 0.0, 1.0].iter().map(|&x| vec![x]).collect();
        let m = 20_000;
        let cov = conditional_coverage(&OracleInterval { oracle: &o, alpha: 0.1 }, &o, &xs, m, 4).unwrap();
        let sd = (0.09f64 / m as f64).sqrt();
        for c in cov {
            assert!((c.coverage - 0.9).abs() < 3.0 * sd, "{}", c.coverage);
        }
    }

    #[test]
    fn proportions_partition_and_csv_shape() {
        let recipe = Recipe {
            realizations: 1,
            mc_draws: 10,
            ..Default::default()
        };
        let xs = vec![vec![0.0], vec![0.5], vec![1.0]];
        let pooled = [0.9, 0.5, 1.0].map(|c| PointCoverage {
            coverage: c,
            set_size: 2.0,
        });
        let rep = CoverageReport::from_pooled(MethodKind::Oracle, &recipe, &xs, &pooled, None);
        let s = &rep.summary;
        assert!((s.proportion_under + s.proportion_correct + s.proportion_over - 1.0).abs() < 1e-12);
        assert_eq!(rep.records[1].classification, Classification::Under);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,x1,empirical,classification,set_size\n"));
        assert_eq!(text.lines().count(), 4);
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        assert!(v["summary"]["runtime_seconds"].is_null());
        assert_eq!(v["method"], "oracle");
    }

    #[test]
    fn test_lattices() {
        let r = Recipe::default();
        assert_eq!(r.test_points().len(), 41);
        let r = Recipe {
            example: ExampleKind::Ex1,
            ..Default::default()
        };
        let pts = r.test_points();
        assert_eq!(pts.len(), 900);
        assert_eq!(pts[0], vec![-5.0, -5.0]);
        assert_eq!(pts[899], vec![5.0, 5.0]);
    }

    #[test]
    fn recipe_errors_name_the_field() {
        let bad = Recipe {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(matches!(run_experiment(&bad), Err(BenchError::Config { field, .. }) if field == "alpha"));
        let bad = Recipe {
            methods: vec![MethodKind::RegSplit],
            n_train: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(BenchError::Config { field, .. }) if field == "n_train"));
        let bad = Recipe {
            test_xs: Some(vec![vec![0.0, 1.0]]),
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(BenchError::Config { field, .. }) if field == "test_xs"));
    }

    #[test]
    fn oracle_recipe_is_mostly_correct_and_deterministic() {
        let recipe = Recipe {
            methods: vec![MethodKind::Oracle, MethodKind::Initial],
            n_cal: 10,
            realizations: 2,
            mc_draws: 1000,
            seed: 17,
            ..Default::default()
        };
        let a = run_experiment(&recipe).unwrap();
        assert_eq!(a.len(), 2);
        assert!(a[0].summary.proportion_correct >= 0.9, "{}", a[0].summary.proportion_correct);
        let b = run_experiment(&recipe).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a[0].records.iter().map(|r| &r.x).collect::<Vec<_>>(), a[1].records.iter().map(|r| &r.x).collect::<Vec<_>>());
    }

    #[test]
    fn recipe_round_trips_through_json() {
        let r = Recipe {
            example: ExampleKind::Ex1,
            methods: vec![MethodKind::CalpitInt, MethodKind::Dcp, MethodKind::RegSplit],
            backend: BackendSpec {
                kind: BackendKind::Local,
                ..Default::default()
            },
            ..Default::default()
        };
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<Recipe>(&text).unwrap(), r);
        let partial: Recipe = serde_json::from_str(r#"{"example":"ex2-kurtotic","methods":["dcp"]}"#).unwrap();
        assert_eq!(partial.mc_draws, 1000);
        assert!(serde_json::from_str::<Recipe>(r#"{"methods":["cqr"]}"#).is_err());
    }
}
