//! `relulab`: runs JSON-configured experiments on ReLU net representation and training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use relu_core::rng::RNG_NAME;

mod config;
mod report;
mod tasks;

use config::{ExperimentConfig, SCHEMA_VERSION};
use report::{Recorder, Report, Timestamp};

/// Configs shipped inside the binary; `run <name>` finds them when no such file exists.
const BUNDLED: &[(&str, &str)] = &[
    ("pwl-decompose", include_str!("../configs/pwl-decompose.json")),
    ("pwl-criteria", include_str!("../configs/pwl-criteria.json")),
    ("net-zonotope", include_str!("../configs/net-zonotope.json")),
    ("erm2-tent", include_str!("../configs/erm2-tent.json")),
    ("erm2-optimality", include_str!("../configs/erm2-optimality.json")),
    ("optim-deterministic", include_str!("../configs/optim-deterministic.json")),
    ("optim-stochastic", include_str!("../configs/optim-stochastic.json")),
    ("tron-suite", include_str!("../configs/tron-suite.json")),
    ("tron-utility", include_str!("../configs/tron-utility.json")),
];

#[derive(Parser)]
#[command(name = "relulab", version, about = "ReLU net experiments driven by JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a bundled config by name.
    Run {
        config: String,
        /// Output directory (default: config's output_dir, else relulab-out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// List bundled configs.
    List,
}

/// Error class that maps to exit code 1 rather than 2.
#[derive(Debug)]
struct Failed;

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("one or more blocking checks failed")
    }
}

impl std::error::Error for Failed {}

fn load(arg: &str) -> Result<(String, String)> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        return Ok((stem, text));
    }
    let name = arg.trim_end_matches(".json");
    match BUNDLED.iter().find(|(n, _)| *n == name) {
        Some((n, text)) => Ok((n.to_string(), text.to_string())),
        None => bail!("no file or bundled config named {arg:?} (try `relulab list`)"),
    }
}

fn run(arg: &str, out: Option<PathBuf>, seeds: Option<Vec<u64>>) -> Result<()> {
    let start = Instant::now();
    let (stem, text) = load(arg)?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing config {arg}"))?;
    if cfg.schema != SCHEMA_VERSION {
        bail!("config schema {} is not supported (expected {SCHEMA_VERSION})", cfg.schema);
    }
    let seeds = seeds.unwrap_or_else(|| cfg.seeds.clone());
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("relulab-out").join(&stem));
    let mut rec = Recorder::new(&out)?;
    eprintln!("{}: {} {} task(s) -> {}", stem, cfg.experiment.len(), cfg.experiment.name(), out.display());
    tasks::run_experiment(&cfg.experiment, &seeds, &mut rec)?;

    for v in &rec.verdicts {
        let tag = match (v.passed, v.blocking) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        eprintln!("[task {}] {tag} {}: {}", v.task, v.name, v.detail);
    }
    let passed = rec.passed();
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: format!("relulab {}", env!("CARGO_PKG_VERSION")),
        rng: RNG_NAME,
        seeds,
        config: serde_json::to_value(&cfg)?,
        results: rec.results,
        verdicts: rec.verdicts,
        passed,
        timestamp: Timestamp {
            unix_secs: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
    };
    let path = out.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    if !passed {
        return Err(Failed.into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("RELULAB_THREADS") {
        match n.parse::<usize>() {
            Ok(n) => {
                // only fails if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("error: RELULAB_THREADS must be a number, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match cli.command {
        Command::List => {
            println!("subcommands: pwl, net, erm2, optim, tron\n\nbundled configs:");
            for (name, text) in BUNDLED {
                let desc = serde_json::from_str::<ExperimentConfig>(text)
                    .map(|c| c.description)
                    .unwrap_or_default();
                println!("  {name:<22} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, out, seeds } => match run(&config, out, seeds) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) if e.is::<Failed>() => {
                eprintln!("{e}");
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
