//! `holonomy`: geometric-phase experiments from the command line.
//!
//! Every subcommand prints a table (CSV by default, JSON lines with
//! `--format jsonl`). Exit status is 0 on success, 1 when the computation
//! rejects its input (orthogonal links, level crossings, non-cyclic runs) and
//! 2 when the input cannot be parsed.

mod commands;
mod config;
mod error;
mod input;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use crate::commands::{AaArgs, BerryArgs, Common, CurvatureArgs, DistanceArgs, JumpArgs, PolygonArgs};
use crate::config::{pick, Config};
use crate::error::{CliError, CliResult};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "holonomy", version, about = "Geometric phases of finite-dimensional quantum systems")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ray distance and transition probability of two states.
    Distance(DistanceArgs),
    /// Polygon, jump-sequence and refined geodesic holonomies of a closed state list.
    Polygon(PolygonArgs),
    /// Berry phases of the spin-J model on latitude loops (or a custom matrix loop).
    Berry(BerryArgs),
    /// Aharonov-Anandan phases of the rotating-field model.
    Aa(AaArgs),
    /// Berry curvature of the spin-J model on a sphere grid.
    Curvature(CurvatureArgs),
    /// Successive filtering measurements through a state list.
    Jump(JumpArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Distance(_) => "distance",
            Self::Polygon(_) => "polygon",
            Self::Berry(_) => "berry",
            Self::Aa(_) => "aa",
            Self::Curvature(_) => "curvature",
            Self::Jump(_) => "jump",
        }
    }
}

/// Long option names a config file may set for `subcommand`.
fn config_keys(subcommand: &str) -> Vec<String> {
    let root = Cli::command();
    let sub = root.find_subcommand(subcommand).expect("known subcommand");
    sub.get_arguments()
        .chain(root.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|k| k != "config" && k != "help" && k != "version")
        .collect()
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("HOLONOMY_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("HOLONOMY_THREADS must be a positive integer (got {value:?})")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let cfg = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let keys = config_keys(cli.command.name());
    cfg.check_keys(&keys.iter().map(String::as_str).collect::<Vec<_>>())?;

    let table = match &cli.command {
        Command::Distance(a) => commands::distance(a, &cfg)?,
        Command::Polygon(a) => commands::polygon(a, &cfg)?,
        Command::Berry(a) => commands::berry(a, &cfg)?,
        Command::Aa(a) => commands::aa(a, &cfg)?,
        Command::Curvature(a) => commands::curvature(a, &cfg)?,
        Command::Jump(a) => commands::jump(a, &cfg)?,
    };

    let format = pick(cli.common.format, &cfg, "format")?.unwrap_or(Format::Csv);
    let output = cli
        .common
        .output
        .clone()
        .or_else(|| cfg.raw("output").map(Into::into));
    let io_err = |path: &str| {
        let path = path.to_string();
        move |source| CliError::Io { path, source }
    };
    match output {
        Some(path) => {
            let name = path.display().to_string();
            let file = File::create(&path).map_err(io_err(&name))?;
            let mut out = BufWriter::new(file);
            table.write(format, &mut out).map_err(io_err(&name))?;
            out.flush().map_err(io_err(&name))?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            table.write(format, &mut out).map_err(io_err("<stdout>"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("holonomy: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
