//! `ris-sim`: command-line front end of the RIS channel simulator.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ris_network::harness::{self, ArchitectureEntry, ScenarioConfig, SCATTER_SCHEMA, SUMMARY_SCHEMA};
use ris_network::Error;

#[derive(Parser)]
#[command(name = "ris-sim", version, about = "Multiport-network channel simulator for RIS-aided links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-way (Z/Y/S) equivalence of the general channel on random networks.
    EquivCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        fixtures: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Received power with and without structural scattering (SISO Monte Carlo).
    Scatter(Common),
    /// Alternating-optimization sweep over RIS sizes and architectures.
    Optimize(Common),
    /// Check a config file and report every problem.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON scenario config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config and RIS_SIM_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated RIS sizes, e.g. 16,64,256.
    #[arg(long, value_delimiter = ',')]
    ni_list: Option<Vec<usize>>,
    /// Comma-separated architectures, e.g. fully,tree,group:4.
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<String>>,
    #[arg(long, value_enum)]
    coupling: Option<Switch>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Message tagged with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn config_error(error: Error) -> Failure {
    Failure { code: 2, message: error.to_string() }
}

fn runtime_error(error: Error) -> Failure {
    let code = if matches!(error, Error::InvalidConfig(_)) { 2 } else { 1 };
    Failure { code, message: error.to_string() }
}

/// Config file, then `RIS_SIM_SEED`, then command-line flags.
fn resolve(c: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::load(p).map_err(config_error)?,
        None => ScenarioConfig::default(),
    };
    cfg.apply_env().map_err(config_error)?;
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(n) = &c.ni_list {
        cfg.n_i_list = n.clone();
    }
    if let Some(a) = &c.arch {
        cfg.architectures = a.iter().map(|s| s.parse::<ArchitectureEntry>()).collect::<Result<_, _>>().map_err(config_error)?;
    }
    if let Some(sw) = c.coupling {
        cfg.coupling = matches!(sw, Switch::On);
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn emit<T: Serialize>(rows: &[T], format: Format, schema: &str, seed: u64, out: Option<&PathBuf>) -> Result<(), Failure> {
    match (format, out) {
        (Format::Csv, Some(p)) => harness::write_csv_file(p, schema, seed, rows).map_err(runtime_error),
        (Format::Csv, None) => harness::write_csv(std::io::stdout().lock(), schema, seed, rows).map_err(runtime_error),
        (Format::Json, out) => {
            let text = serde_json::to_string_pretty(rows).expect("rows serialize");
            match out {
                Some(p) => std::fs::write(p, text + "\n")
                    .map_err(|e| runtime_error(Error::Io { path: p.display().to_string(), message: e.to_string() })),
                None => {
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                    Ok(())
                }
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::EquivCheck { seed, fixtures, format } => {
            let r = harness::equivalence_check(seed, fixtures).map_err(runtime_error)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&r).expect("report serializes")),
                Format::Csv => println!("fixtures={} seed={} max_deviation={:.3e}", r.fixtures, r.seed, r.max_deviation),
            }
            if r.max_deviation < 1e-9 {
                Ok(())
            } else {
                Err(Failure { code: 1, message: format!("three-way deviation {:.3e} exceeds 1e-9", r.max_deviation) })
            }
        }
        Command::Scatter(c) => {
            let cfg = resolve(&c)?;
            let rows = harness::scatter_rows(&cfg.n_i_list, cfg.trials, cfg.master_seed, cfg.scatter_model).map_err(runtime_error)?;
            emit(&rows, c.format, SCATTER_SCHEMA, cfg.master_seed, cfg.output.as_ref())
        }
        Command::Optimize(c) => {
            let cfg = resolve(&c)?;
            // records go to --out as CSV; the summary goes to stdout
            let outcome = harness::run_sweep(&cfg).map_err(runtime_error)?;
            emit(&outcome.summary, c.format, SUMMARY_SCHEMA, cfg.master_seed, None)?;
            outcome.check().map_err(runtime_error)
        }
        Command::ValidateConfig { config } => {
            let mut cfg = ScenarioConfig::load(&config).map_err(config_error)?;
            cfg.apply_env().map_err(config_error)?;
            cfg.validate().map_err(config_error)?;
            println!("{}: ok", config.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ris-sim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
