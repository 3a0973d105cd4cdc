//! Datasets, evaluation points and initial models shared by the commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use calpit::calibrate::{CalibrationSet, FittedModel};
use calpit::grid::{FixedModel, GaussianModel, InitialModel, YGrid, DEFAULT_GRID_PADDING};

use crate::config::{InitialChoice, InitialConfig};
use crate::error::{CliError, CliResult};

/// A serialized initial model (`initial_model.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialFile {
    Gaussian(GaussianModel),
    Fixed(FixedModel),
}

impl InitialFile {
    pub fn model(&self) -> &dyn InitialModel {
        match self {
            InitialFile::Gaussian(m) => m,
            InitialFile::Fixed(m) => m,
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::usage(format!("cannot read initial model `{}`: {e}", path.display())))?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| CliError::usage(format!("initial model `{}`: {e}", path.display())))
    }
}

pub fn read_dataset(path: &Path, what: &str) -> CliResult<CalibrationSet> {
    let set = CalibrationSet::read_csv_path(path)
        .map_err(|e| CliError::usage(format!("cannot read {what} `{}`: {e}", path.display())))?;
    if set.is_empty() {
        return Err(CliError::usage(format!("{what} `{}` has no rows", path.display())));
    }
    Ok(set)
}

pub fn read_model(path: &Path) -> CliResult<FittedModel> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot read model `{}`: {e}", path.display())))?;
    FittedModel::read_json(std::io::BufReader::new(file))
        .map_err(|e| CliError::usage(format!("model `{}`: {e}", path.display())))
}

/// Reads `x0,...,x{d-1}` rows; a final `y` column is ignored.
pub fn read_points(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let fail = |line: u64, msg: String| CliError::usage(format!("{} line {line}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot read points `{}`: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| fail(1, e.to_string()))?.clone();
    let mut d = headers.len();
    if headers.iter().last().map(str::trim) == Some("y") {
        d -= 1;
    }
    for (j, h) in headers.iter().take(d).enumerate() {
        if h.trim() != format!("x{j}") {
            return Err(fail(1, format!("column {j} is `{h}`, expected `x{j}`")));
        }
    }
    let mut points = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| fail(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let x = record
            .iter()
            .take(d)
            .map(|v| v.trim().parse::<f64>().map_err(|e| fail(line, format!("`{v}`: {e}"))))
            .collect::<CliResult<Vec<f64>>>()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(fail(line, "non-finite value".into()));
        }
        points.push(x);
    }
    Ok(points)
}

pub fn check_dims(points: &[Vec<f64>], dim: usize) -> CliResult<()> {
    match points.iter().position(|x| x.len() != dim) {
        Some(i) => Err(CliError::usage(format!(
            "evaluation point {i} has {} features, the data has {dim}",
            points[i].len()
        ))),
        None => Ok(()),
    }
}

/// Builds the initial model; fitted kinds use `train`, or the calibration data when absent.
pub fn build_initial(
    cfg: &InitialConfig,
    cal: &CalibrationSet,
    train: Option<&CalibrationSet>,
) -> CliResult<InitialFile> {
    let fit_data = train.unwrap_or(cal);
    if train.is_none() && matches!(cfg.kind, InitialChoice::GaussianFit | InitialChoice::Marginal) {
        eprintln!("warning: no training data given; fitting the initial model on the calibration data");
    }
    let grid = || -> CliResult<YGrid> {
        Ok(match cfg.grid {
            Some(spec) => spec.build()?,
            None => {
                let mut ys = cal.ys().to_vec();
                if let Some(t) = train {
                    ys.extend_from_slice(t.ys());
                }
                YGrid::spanning(&ys, cfg.grid_points, DEFAULT_GRID_PADDING)?
            }
        })
    };
    Ok(match cfg.kind {
        InitialChoice::Uniform => InitialFile::Fixed(FixedModel::uniform(grid()?)),
        InitialChoice::GaussianFit => {
            if fit_data.dim() != cal.dim() {
                return Err(CliError::usage("training and calibration data differ in feature count"));
            }
            InitialFile::Gaussian(GaussianModel::fit_ridge(grid()?, fit_data, cfg.ridge_lambda, cfg.dispersion)?)
        }
        InitialChoice::Marginal => InitialFile::Fixed(FixedModel::marginal(grid()?, fit_data.ys(), None)?),
        InitialChoice::File => {
            let path = cfg
                .path
                .as_deref()
                .ok_or_else(|| CliError::usage("initial model kind `file` needs a path"))?;
            InitialFile::read(path)?
        }
    })
}
