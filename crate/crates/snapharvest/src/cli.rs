//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::{BackendName, RunConfig};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "snapharvest",
    version,
    about = "Simulate and explore a Curie-threshold snap-through thermal energy harvester"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration; every field is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Force backend (overrides force.backend).
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendName>,
    /// Worker threads for table builds, sweeps and optimizer restarts.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Also write trace.svg (overrides output.svg).
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the time-domain simulation.
    Simulate,
    /// Static release and capture temperatures.
    Thresholds,
    /// Tabulate the magnetic force over displacement and temperature.
    ForceTable,
    /// Energy per cycle over the configured parameter grid.
    Sweep,
    /// Maximize energy per cycle inside the configured bounds.
    Optimize,
    /// Draw trace.svg from a time-series CSV.
    Plot {
        /// Time series to plot; defaults to timeseries.csv in the output directory.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
}

/// Effective configuration: the file (or defaults) with flags applied.
pub fn effective_config(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, base_dir) = match &cli.config {
        Some(path) => (
            RunConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(b) = cli.backend {
        cfg.force.backend = b;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if cli.svg {
        cfg.output.svg = true;
    }
    cfg.validate()?;
    Ok((cfg, base_dir))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let (cfg, base_dir) = effective_config(cli)?;
    let out = PathBuf::from(&cfg.output.dir);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads", "must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::invalid("--threads", e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate => commands::simulate(&cfg, &base_dir, &out),
        Command::Thresholds => commands::thresholds(&cfg, &base_dir, &out),
        Command::ForceTable => commands::force_table(&cfg, &base_dir, &out),
        Command::Sweep => commands::sweep(&cfg, &base_dir, &out),
        Command::Optimize => commands::optimize(&cfg, &base_dir, &out),
        Command::Plot { input } => {
            let input = input.clone().unwrap_or_else(|| out.join(commands::TIMESERIES_FILE));
            commands::plot(&input, &out)
        }
    })
}
