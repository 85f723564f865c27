#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod error;
mod output;

use config::ExperimentConfig;
use error::CliError;
use output::{error_record, Emitter, Outcome, RunRecord, VERSION};

#[derive(Parser)]
#[command(name = "gcf", version, about = "Grand-canonical transfer-operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `[output] dir`.
    #[arg(long, global = true, env = "GCF_OUT")]
    out: Option<PathBuf>,

    /// Worker threads; defaults to the config value, then to all cores.
    #[arg(long, global = true, env = "GCF_THREADS")]
    threads: Option<usize>,

    /// Optimizer seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the three assumptions on the family.
    Admissibility,
    /// Leading eigenvalue with the eigenfunction and eigenmeasure tables.
    Spectrum,
    /// Pressure identity and the partition-function sequence.
    Pressure,
    /// `log λ` over a `(β, μ)` grid with divided differences.
    Sweep,
    /// Scalar grand-canonical ensemble: `Z`, `P_N`, moments, gas pressure.
    Grandstats,
    /// Maximum-entropy and canonical distributions.
    Maxent,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Admissibility => "admissibility",
            Command::Spectrum => "spectrum",
            Command::Pressure => "pressure",
            Command::Sweep => "sweep",
            Command::Grandstats => "grandstats",
            Command::Maxent => "maxent",
        }
    }

    fn run(self, cfg: &ExperimentConfig, out: &mut Emitter) -> Result<Outcome, CliError> {
        match self {
            Command::Admissibility => commands::admissibility(cfg, out),
            Command::Spectrum => commands::spectrum(cfg, out),
            Command::Pressure => commands::pressure(cfg, out),
            Command::Sweep => commands::sweep(cfg, out),
            Command::Grandstats => commands::grandstats(cfg, out),
            Command::Maxent => commands::maxent(cfg, out),
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        cfg.threads = Some(t);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load(cli)?;
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let name = cli.command.name();
    let mut out = Emitter::new(cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")))?;
    let start = Instant::now();
    let outcome = cli.command.run(&cfg, &mut out);
    let elapsed = start.elapsed().as_secs_f64();
    let (code, record) = match outcome {
        Ok(o) => (
            o.status.exit_code(),
            RunRecord {
                command: name,
                version: VERSION,
                seed: cfg.seed,
                status: o.status,
                config: &cfg,
                result: Some(o.result),
                error: None,
            },
        ),
        Err(e @ CliError::Math(_)) => {
            eprintln!("gcf {name}: {e}");
            (
                e.exit_code(),
                RunRecord {
                    command: name,
                    version: VERSION,
                    seed: cfg.seed,
                    status: output::Status::Failed,
                    config: &cfg,
                    result: None,
                    error: Some(error_record(&e)),
                },
            )
        }
        Err(e) => return Err(e),
    };
    out.json(name, &record)?;
    out.json(
        &format!("{name}.timing"),
        &json!({ "command": name, "wall_seconds": elapsed, "threads": threads }),
    )?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gcf: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
