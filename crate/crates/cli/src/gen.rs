use serde_json::json;

use calpit::bench::{ExampleKind, Recipe};
use calpit::grid::FixedModel;
use calpit::synth::{
    chunk_tc, sample_example1, sample_example2, simulate_tc, write_tc_jsonl, Example2Oracle, Example2Setting,
    EXAMPLE2_X_RANGE,
};

use crate::config::{GeneratorName, RunConfig};
use crate::error::{CliError, CliResult};
use crate::inputs::InitialFile;
use crate::output::Outputs;

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let g = &cfg.generator;
    let name = g
        .name
        .ok_or_else(|| CliError::usage("no generator given; use --example ex1|ex2-skewed|ex2-kurtotic|tc"))?;
    let seed = g.seed.unwrap_or(cfg.seed);
    match name {
        GeneratorName::Ex1 => {
            let (data, oracle) = sample_example1(&g.two_group, g.n, seed)?;
            out.csv("data.csv", |w| data.write_csv(w))?;
            let grid = recipe_grid(ExampleKind::Ex1)?;
            out.json("initial_model.json", &InitialFile::Fixed(FixedModel::uniform(grid)))?;
            out.json(
                "oracle.json",
                &json!({ "example": "ex1", "n": g.n, "seed": seed, "params": oracle.config }),
            )?;
        }
        GeneratorName::Ex2Skewed | GeneratorName::Ex2Kurtotic => {
            let (setting, kind) = if name == GeneratorName::Ex2Skewed {
                (Example2Setting::Skewed, ExampleKind::Ex2Skewed)
            } else {
                (Example2Setting::Kurtotic, ExampleKind::Ex2Kurtotic)
            };
            let (data, oracle) = sample_example2(setting, g.n, seed)?;
            out.csv("data.csv", |w| data.write_csv(w))?;
            let initial = Example2Oracle::initial_model(recipe_grid(kind)?)?;
            out.json("initial_model.json", &InitialFile::Gaussian(initial))?;
            out.json(
                "oracle.json",
                &json!({
                    "example": kind,
                    "n": g.n,
                    "seed": seed,
                    "params": oracle,
                    "x_range": EXAMPLE2_X_RANGE,
                }),
            )?;
        }
        GeneratorName::Tc => {
            let storms = simulate_tc(&g.tc, g.storms, seed)?;
            let (windows, report) = chunk_tc(&storms, &g.tc, g.tc_mode, g.tc_features)?;
            out.jsonl("storms.jsonl", |w| write_tc_jsonl(&storms, g.tc.step_minutes, w))?;
            out.csv("windows.csv", |w| windows.write_csv(w))?;
            out.json(
                "oracle.json",
                &json!({
                    "example": "tc",
                    "storms": g.storms,
                    "seed": seed,
                    "steps": storms.iter().map(|s| s.len()).sum::<usize>(),
                    "windows": report.windows,
                    "skipped_storms": report.skipped_storms,
                    "mode": g.tc_mode,
                    "features": g.tc_features,
                    "params": g.tc,
                }),
            )?;
        }
    }
    Ok(())
}

fn recipe_grid(example: ExampleKind) -> CliResult<calpit::grid::YGrid> {
    let recipe = Recipe {
        example,
        ..Recipe::default()
    };
    Ok(recipe.y_grid().build()?)
}
