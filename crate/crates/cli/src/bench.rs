use calpit::bench::run_experiment;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::Outputs;

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let recipe = cfg.bench.clone();
    recipe.validate()?;
    for report in run_experiment(&recipe)? {
        let stem = format!("bench_{}", report.method.name());
        out.json(&format!("{stem}.json"), &report)?;
        out.csv(&format!("{stem}.csv"), |w| report.write_csv(w))?;
    }
    Ok(())
}
