//! Run configuration: one TOML file per run, overridden by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use calpit::bench::{BackendKind, BackendSpec, GridSpec, Recipe};
use calpit::diagnose::{DEFAULT_BAND_ETA, DEFAULT_TEST_GRID};
use calpit::synth::{ChunkFeatures, ChunkMode, TcModelConfig, TwoGroupConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorName {
    Ex1,
    Ex2Skewed,
    Ex2Kurtotic,
    Tc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialChoice {
    Uniform,
    #[default]
    GaussianFit,
    Marginal,
    /// A model written by `gen` or `calibrate` (`initial_model.json`).
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: Option<GeneratorName>,
    pub n: usize,
    pub storms: usize,
    pub tc_mode: ChunkMode,
    pub tc_features: ChunkFeatures,
    /// Overrides the root seed for data generation.
    pub seed: Option<u64>,
    pub two_group: TwoGroupConfig,
    pub tc: TcModelConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            name: None,
            n: 10_000,
            storms: 50,
            tc_mode: ChunkMode::Overlapping,
            tc_features: ChunkFeatures::Summary,
            seed: None,
            two_group: TwoGroupConfig::default(),
            tc: TcModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Calibration (or diagnostic) sample, `x0,...,y` CSV.
    pub calibration: Option<PathBuf>,
    /// Training sample for fitted initial models.
    pub train: Option<PathBuf>,
    /// Evaluation points, `x0,...` CSV (a trailing `y` column is ignored).
    pub eval: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialChoice,
    pub path: Option<PathBuf>,
    pub ridge_lambda: f64,
    pub dispersion: f64,
    /// Response grid; spans the observed responses when absent.
    pub grid: Option<GridSpec>,
    pub grid_points: usize,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: InitialChoice::GaussianFit,
            path: None,
            ridge_lambda: 1e-3,
            dispersion: 1.0,
            grid: None,
            grid_points: 201,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub at: Vec<Vec<f64>>,
    pub hpd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Monte Carlo null refits `B`.
    pub replicates: usize,
    /// Evaluation points drawn from the data when none are given.
    pub points: usize,
    pub at: Vec<Vec<f64>>,
    pub band_eta: f64,
    pub test_grid: usize,
    /// Interior ALP grid `i/(n+1)`, `i = 1..n`.
    pub alp_grid: usize,
    pub pit_bins: usize,
    /// Backend of the observed ALP fit; null refits are always local.
    pub backend: BackendKind,
    /// Fitted PIT-CDF model; when given, the recalibrated model is diagnosed.
    pub model: Option<PathBuf>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            points: 20,
            at: Vec::new(),
            band_eta: DEFAULT_BAND_ETA,
            test_grid: DEFAULT_TEST_GRID,
            alp_grid: 99,
            pit_bins: 20,
            backend: BackendKind::Local,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub alpha: f64,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    pub generator: GeneratorConfig,
    pub data: DataConfig,
    pub initial_model: InitialConfig,
    pub backend: BackendSpec,
    pub calibrate: CalibrateConfig,
    pub diagnose: DiagnoseConfig,
    pub bench: Recipe,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            alpha: 0.1,
            out_dir: None,
            threads: None,
            generator: GeneratorConfig::default(),
            data: DataConfig::default(),
            initial_model: InitialConfig::default(),
            backend: BackendSpec::default(),
            calibrate: CalibrateConfig::default(),
            diagnose: DiagnoseConfig::default(),
            bench: Recipe::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config `{}`: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("config `{}`: {e}", path.display())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("calpit-out"))
    }

    /// SHA-256 of the canonical JSON form; output directory and thread count are excluded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes");
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}

/// Parses a comma-separated feature vector such as `0.5,-1`.
pub fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}
