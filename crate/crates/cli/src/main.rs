//! Runs named presets or parameter sweeps and writes CSV or JSON.
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nmmetro_core::sweeps::{preset, run_sweep, ExperimentConfig, Format, PRESETS};

#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output file (stdout when omitted)
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = available parallelism)
    #[arg(short, long, global = true, default_value_t = 0)]
    workers: usize,

    /// Upper bound on the integration step, in units of 1/omega0
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Output format: csv or json
    #[arg(short, long, global = true, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset
    Preset {
        /// One of fig1b, fig1c, fig1d, fig2a, fig2b, fig3a, fig3b, fig3c
        name: String,
    },
    /// Run a sweep described by a config file
    Sweep {
        /// Sectioned key = value config file
        config: PathBuf,
    },
    /// List preset names
    List,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.command {
        Command::List => {
            for name in PRESETS {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Preset { name } => preset(name)?,
        Command::Sweep { config } => {
            let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("in {}", config.display()))?
        }
    };
    if cli.dt.is_some() {
        cfg.dt = cli.dt;
        cfg.validate()?;
    }
    let result = run_sweep(&cfg, cli.workers)?;
    let failed = result.rows.iter().filter(|r| r.status != "ok").count();
    match &cli.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(file);
            result.write(&mut out, cli.format)?;
            out.flush()?;
            eprintln!("wrote {} rows to {}", result.rows.len(), path.display());
        }
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            result.write(&mut out, cli.format)?;
            out.flush()?;
        }
    }
    if failed > 0 {
        eprintln!("warning: {failed} rows flagged (see status column)");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
