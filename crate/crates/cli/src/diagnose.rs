use std::io::Write;

use serde_json::json;

use calpit::bench::{BackendKind, BackendSpec};
use calpit::calibrate::{compute_pit_values, RecalibratedModel};
use calpit::diagnose::{alp_curve, pit_histogram, LocalCoverageTest, MIN_BAND_REPLICATES};
use calpit::grid::InitialModel;
use calpit::rng;
use calpit::stats::linspace;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::{build_initial, check_dims, read_dataset, read_model, read_points};
use crate::output::Outputs;

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let d = &cfg.diagnose;
    if d.replicates == 0 {
        return Err(CliError::usage("replicates must be at least 1"));
    }
    if !(d.band_eta > 0.0 && d.band_eta < 1.0) {
        return Err(CliError::usage(format!("band eta must lie in (0, 1), got {}", d.band_eta)));
    }
    if d.test_grid < 2 || d.alp_grid < 2 || d.pit_bins == 0 {
        return Err(CliError::usage("test_grid and alp_grid need at least 2 points, pit_bins at least 1"));
    }
    let data_path = cfg
        .data
        .calibration
        .as_deref()
        .ok_or_else(|| CliError::usage("no diagnostic data given; use --data"))?;
    let data = read_dataset(data_path, "diagnostic data")?;
    let train = cfg.data.train.as_deref().map(|p| read_dataset(p, "training data")).transpose()?;
    let fitted = d.model.as_deref().map(read_model).transpose()?;

    let mut points = d.at.clone();
    if let Some(path) = &cfg.data.eval {
        points.extend(read_points(path)?);
    }
    if points.is_empty() {
        let step = (data.len() / d.points.max(1)).max(1);
        points = (0..data.len()).step_by(step).take(d.points).map(|i| data.row(i).to_vec()).collect();
    }
    check_dims(&points, data.dim())?;

    let initial = build_initial(&cfg.initial_model, &data, train.as_ref())?;
    let recalibrated = fitted.as_ref().map(|f| RecalibratedModel {
        initial: initial.model(),
        r: f.as_model(),
    });
    let model: &dyn InitialModel = match &recalibrated {
        Some(m) => m,
        None => initial.model(),
    };

    if d.backend != BackendKind::Local {
        eprintln!("warning: the observed fit uses the network backend; null refits use the local-empirical backend");
    }
    let pits = compute_pit_values(model, &data)?;
    let observed_spec = BackendSpec {
        kind: d.backend,
        ..cfg.backend.clone()
    };
    let observed = observed_spec.fit_model(&data, &pits, rng::derive(cfg.seed, "observed"))?;
    let observed = observed.as_model();
    let test = LocalCoverageTest::fit(&cfg.backend.local, &data, d.replicates, rng::derive(cfg.seed, "null"))?;

    let test_gammas = linspace(0.05, 0.95, d.test_grid);
    let step = 1.0 / (d.alp_grid + 1) as f64;
    let alp_gammas = linspace(step, 1.0 - step, d.alp_grid);
    let with_band = d.replicates >= MIN_BAND_REPLICATES;
    if !with_band {
        eprintln!("warning: {} replicates are too few for confidence bands; ALP files carry no band", d.replicates);
    }
    let mut results = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        results.push(test.p_value(observed, x, &test_gammas)?);
        let mut curve = alp_curve(observed, x, &alp_gammas)?;
        if with_band {
            let (lo, hi) = test.band(x, &alp_gammas, d.band_eta)?;
            curve = curve.with_band(lo, hi);
        }
        out.csv(&format!("alp/point_{i:03}.csv"), |w| curve.write_csv(w))?;
    }
    let rejected = results.iter().filter(|r| r.p_value <= 0.05).count();
    out.json(
        "tests.json",
        &json!({
            "results": results,
            "summary": {
                "points": results.len(),
                "rejected_at_0.05": rejected,
                "rejection_rate": rejected as f64 / results.len() as f64,
                "recalibrated": fitted.is_some(),
                "band_eta": if with_band { Some(d.band_eta) } else { None },
            },
        }),
    )?;

    let counts = pit_histogram(&pits, d.pit_bins);
    out.csv("pit_histogram.csv", |w| -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        let width = 1.0 / d.pit_bins as f64;
        for (b, c) in counts.iter().enumerate() {
            writeln!(w, "{:.6},{:.6},{c}", b as f64 * width, (b + 1) as f64 * width)?;
        }
        Ok(())
    })?;
    Ok(())
}
