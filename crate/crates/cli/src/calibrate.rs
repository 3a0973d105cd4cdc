use std::io::Write;

use calpit::calibrate::{calpit_hpd, calpit_interval, compute_pit_values, recalibrate, RecalibratedDistribution};
use calpit::grid::GridCdf;
use calpit::rng;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::{build_initial, check_dims, read_dataset, read_points};
use crate::output::Outputs;

struct PointResult {
    x: Vec<f64>,
    initial: GridCdf,
    recal: RecalibratedDistribution,
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let alpha = cfg.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let cal_path = cfg
        .data
        .calibration
        .as_deref()
        .ok_or_else(|| CliError::usage("no calibration data given; use --data"))?;
    let cal = read_dataset(cal_path, "calibration data")?;
    let train = cfg.data.train.as_deref().map(|p| read_dataset(p, "training data")).transpose()?;
    let mut points = cfg.calibrate.at.clone();
    if let Some(path) = &cfg.data.eval {
        points.extend(read_points(path)?);
    }
    check_dims(&points, cal.dim())?;

    let initial = build_initial(&cfg.initial_model, &cal, train.as_ref())?;
    let model = initial.model();
    let pits = compute_pit_values(model, &cal)?;
    let fitted = cfg.backend.fit_model(&cal, &pits, rng::derive(cfg.seed, "calibrate"))?;
    let r = fitted.as_model();

    let results = points
        .iter()
        .map(|x| {
            Ok(PointResult {
                x: x.clone(),
                initial: model.cdf_at(x)?,
                recal: recalibrate(model, r, x)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut model_json = Vec::new();
    fitted.write_json(&mut model_json)?;
    let model_value: serde_json::Value =
        serde_json::from_slice(&model_json).map_err(|e| CliError::Output(e.to_string()))?;
    out.json("model.json", &model_value)?;
    out.json("initial_model.json", &initial)?;
    if results.is_empty() {
        return Ok(());
    }

    out.csv("recalibrated_cdf.csv", |w| -> std::io::Result<()> {
        writeln!(w, "point,y,initial_cdf,cdf,pdf")?;
        for (i, p) in results.iter().enumerate() {
            let cdf = p.recal.cdf();
            for (j, &y) in cdf.grid().points().iter().enumerate() {
                writeln!(
                    w,
                    "{i},{y:.17e},{:.17e},{:.17e},{:.17e}",
                    p.initial.values()[j],
                    cdf.values()[j],
                    p.recal.pdf().values()[j]
                )?;
            }
        }
        Ok(())
    })?;

    let dim = cal.dim();
    let coords = |x: &[f64]| x.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",");
    let x_header = (0..dim).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    let mut intervals = Vec::with_capacity(results.len());
    for p in &results {
        let set = calpit_interval(&p.recal, alpha)?;
        let (lo, hi) = set.intervals[0];
        let initial = (p.initial.invert(alpha / 2.0), p.initial.invert(1.0 - alpha / 2.0));
        intervals.push((lo, hi, initial));
    }
    out.csv("intervals.csv", |w| -> std::io::Result<()> {
        writeln!(w, "point,{x_header},lo,hi,initial_lo,initial_hi")?;
        for (i, (p, (lo, hi, init))) in results.iter().zip(&intervals).enumerate() {
            writeln!(
                w,
                "{i},{},{lo:.17e},{hi:.17e},{:.17e},{:.17e}",
                coords(&p.x),
                init.0,
                init.1
            )?;
        }
        Ok(())
    })?;

    if cfg.calibrate.hpd {
        let sets = results
            .iter()
            .map(|p| {
                let set = calpit_hpd(&p.recal, alpha)?;
                let mass = p.recal.mass(&set);
                Ok((set, mass))
            })
            .collect::<CliResult<Vec<_>>>()?;
        out.csv("hpd.csv", |w| -> std::io::Result<()> {
            writeln!(w, "point,{x_header},segment,lo,hi,mass")?;
            for (i, (p, (set, mass))) in results.iter().zip(&sets).enumerate() {
                for (s, (lo, hi)) in set.intervals.iter().enumerate() {
                    writeln!(w, "{i},{},{s},{lo:.17e},{hi:.17e},{mass:.17e}", coords(&p.x))?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}
