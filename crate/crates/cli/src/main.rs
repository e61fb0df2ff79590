//! `dihedral`: command-line driver for the dihedral vortex laboratory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
mod commands;
mod config;
mod export;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Probe;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration (exit 2).
    Config(String),
    /// Integration or output failure (exit 3).
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dihedral",
    version,
    about = "Dihedral logarithmic point vortices in McGehee coordinates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a generalized solution described by a JSON scenario.
    Simulate {
        config: PathBuf,
        /// Output directory; files go to `<out>/<scenario name>/`.
        #[arg(long, env = "DIHEDRAL_OUT_DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Sample the four rest-point curves with their spectra (CSV).
    Restpoints {
        #[arg(long, allow_hyphen_values = true)]
        h: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample Ehat on an (r, alpha) grid and extract its zero level.
    Manifolds {
        #[arg(long, allow_hyphen_values = true)]
        h: f64,
        /// Grid size as `RxA`.
        #[arg(long, default_value = "200x101", value_parser = commands::parse_grid)]
        grid: (usize, usize),
        #[arg(long, default_value_t = 2)]
        l: u32,
        #[arg(long, default_value_t = 4.0)]
        r_max: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a published initial condition and write its plot data.
    ReproduceFigure {
        /// ejection, pseudolemniscata, turning_point, transmission or all.
        name: String,
        #[arg(long, env = "DIHEDRAL_OUT_DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Run an empirical probe and write a JSON report.
    Scan {
        #[arg(value_enum)]
        probe: Probe,
        config: PathBuf,
        #[arg(long, env = "DIHEDRAL_OUT_DIR", default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::Restpoints { h, n, out } => commands::restpoints(h, n, &out),
        Command::Manifolds {
            h,
            grid,
            l,
            r_max,
            out,
        } => commands::manifolds(h, grid, l, r_max, &out),
        Command::ReproduceFigure { name, out } => commands::reproduce_figure(&name, &out),
        Command::Scan { probe, config, out } => commands::scan(probe, &config, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dihedral: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
