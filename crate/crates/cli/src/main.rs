//! `calpit`: synthetic data, Cal-PIT recalibration, local diagnostics and
//! coverage benchmarks from the command line.
//!
//! Every run is determined by a TOML config (`--config`) plus flag overrides.
//! Outputs embed the tool version, a hash of the effective config and the
//! root seed, and each output directory gets a `manifest.json`.

mod bench;
mod calibrate;
mod config;
mod diagnose;
mod error;
mod gen;
mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use calpit::bench::{BackendKind, ExampleKind, MethodKind};

use crate::config::{parse_point, GeneratorName, InitialChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{Outputs, Provenance};

#[derive(Parser)]
#[command(name = "calpit", version, about = "Conditional recalibration of predictive distributions")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: calpit-out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset.
    Gen(GenArgs),
    /// Fit the PIT-CDF and recalibrate at requested points.
    Calibrate(CalibrateArgs),
    /// ALP curves and local coverage tests.
    Diagnose(DiagnoseArgs),
    /// Monte Carlo conditional-coverage benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    example: Option<GeneratorName>,
    /// Rows for Examples 1 and 2.
    #[arg(long)]
    n: Option<usize>,
    /// Storms for the TC generator.
    #[arg(long)]
    storms: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    /// Calibration or diagnostic data (`x0,...,y` CSV).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Training data for fitted initial models.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, value_enum)]
    initial: Option<InitialChoice>,
    /// Initial model JSON; implies `--initial file`.
    #[arg(long)]
    initial_file: Option<PathBuf>,
    /// Evaluation point, comma-separated features; repeatable.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    at: Vec<Vec<f64>>,
    /// Evaluation points (`x0,...` CSV).
    #[arg(long)]
    eval: Option<PathBuf>,
}

impl ModelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if let Some(p) = self.data {
            cfg.data.calibration = Some(p);
        }
        if let Some(p) = self.train {
            cfg.data.train = Some(p);
        }
        if let Some(k) = self.initial {
            cfg.initial_model.kind = k;
        }
        if let Some(p) = self.initial_file {
            cfg.initial_model.kind = InitialChoice::File;
            cfg.initial_model.path = Some(p);
        }
        if let Some(p) = self.eval {
            cfg.data.eval = Some(p);
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `net` or `local`.
    #[arg(long, value_parser = kebab::<BackendKind>)]
    backend: Option<BackendKind>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Also emit HPD sets.
    #[arg(long)]
    hpd: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fitted PIT-CDF model; diagnoses the recalibrated model.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Backend of the observed ALP fit, `local` or `net`.
    #[arg(long, value_parser = kebab::<BackendKind>)]
    backend: Option<BackendKind>,
    /// Monte Carlo null refits.
    #[arg(long)]
    replicates: Option<usize>,
    /// Evaluation points taken from the data when none are given.
    #[arg(long)]
    points: Option<usize>,
    /// Confidence band level `1 - eta` [default: 0.05].
    #[arg(long)]
    band_eta: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// `ex1`, `ex2-skewed` or `ex2-kurtotic`.
    #[arg(long, value_parser = kebab::<ExampleKind>)]
    example: Option<ExampleKind>,
    /// Comma-separated: calpit-int, calpit-hpd, initial, dcp, reg-split, oracle.
    #[arg(long, value_parser = kebab::<MethodKind>, value_delimiter = ',')]
    methods: Vec<MethodKind>,
    /// `net` or `local`.
    #[arg(long, value_parser = kebab::<BackendKind>)]
    backend: Option<BackendKind>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    mc_draws: Option<usize>,
    /// Reduced preset: 3 realizations, 300 draws.
    #[arg(long)]
    quick: bool,
    /// Record wall-clock time in the report summaries.
    #[arg(long)]
    timing: bool,
}

/// Parses a library enum from its kebab-case name.
fn kebab<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn configure(cli: Cli) -> CliResult<(RunConfig, &'static str)> {
    let mut cfg = RunConfig::load(cli.shared.config.as_deref())?;
    if let Some(s) = cli.shared.seed {
        cfg.seed = s;
        cfg.generator.seed = None;
    }
    if let Some(d) = cli.shared.out_dir {
        cfg.out_dir = Some(d);
    }
    if let Some(t) = cli.shared.threads {
        cfg.threads = Some(t);
    }
    let name = match cli.command {
        Command::Gen(a) => {
            if let Some(e) = a.example {
                cfg.generator.name = Some(e);
            }
            if let Some(n) = a.n {
                cfg.generator.n = n;
            }
            if let Some(n) = a.storms {
                cfg.generator.storms = n;
            }
            "gen"
        }
        Command::Calibrate(a) => {
            cfg.calibrate.at.extend(a.model.at.iter().cloned());
            a.model.apply(&mut cfg);
            if let Some(b) = a.backend {
                cfg.backend.kind = b;
            }
            if let Some(al) = a.alpha {
                cfg.alpha = al;
            }
            cfg.calibrate.hpd |= a.hpd;
            "calibrate"
        }
        Command::Diagnose(a) => {
            cfg.diagnose.at.extend(a.model.at.iter().cloned());
            a.model.apply(&mut cfg);
            if let Some(p) = a.model_file {
                cfg.diagnose.model = Some(p);
            }
            if let Some(b) = a.backend {
                cfg.diagnose.backend = b;
            }
            if let Some(b) = a.replicates {
                cfg.diagnose.replicates = b;
            }
            if let Some(p) = a.points {
                cfg.diagnose.points = p;
            }
            if let Some(e) = a.band_eta {
                cfg.diagnose.band_eta = e;
            }
            "diagnose"
        }
        Command::Bench(a) => {
            let b = &mut cfg.bench;
            if let Some(e) = a.example {
                b.example = e;
            }
            if !a.methods.is_empty() {
                b.methods = a.methods;
            }
            if let Some(k) = a.backend {
                b.backend.kind = k;
            }
            if a.quick {
                *b = b.clone().quick();
            }
            if let Some(r) = a.realizations {
                b.realizations = r;
            }
            if let Some(m) = a.mc_draws {
                b.mc_draws = m;
            }
            b.timing |= a.timing;
            "bench"
        }
    };
    cfg.bench.seed = cfg.seed;
    Ok((cfg, name))
}

fn execute(cfg: &RunConfig, command: &str) -> CliResult<()> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
    }
    let mut out = Outputs::new(Provenance::new(cfg));
    match command {
        "gen" => gen::run(cfg, &mut out)?,
        "calibrate" => calibrate::run(cfg, &mut out)?,
        "diagnose" => diagnose::run(cfg, &mut out)?,
        "bench" => bench::run(cfg, &mut out)?,
        _ => unreachable!("unknown command {command}"),
    }
    let dir = cfg.out_dir();
    for path in out.commit(&dir, command, cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure(cli).and_then(|(cfg, command)| execute(&cfg, command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
