//! `doa`: inner estimates of domains of attraction from the command line.
//!
//! Exit codes: 0 on success, 1 for usage, configuration or I/O errors, 2 when
//! the method does not apply to the system.

mod commands;
mod config;
mod figure;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{NotApplicable, Session};
use config::{CommonArgs, GridArgs};

#[derive(Parser)]
#[command(
    name = "doa",
    version,
    about = "Estimate domains of attraction of discrete maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the Jacobian at the origin and compute the attraction ball.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Directions sampled when computing the ball radius.
        #[arg(long)]
        directions: Option<usize>,
    },
    /// Rasterize N_p, M_p and their windowed variants.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Brute-force basin mask by forward iteration.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Also locate cycles of these periods, e.g. "2..5".
        #[arg(long)]
        periodic: Option<String>,
    },
    /// Compare the masks in a directory against the oracle and check the
    /// inclusions between them.
    Report {
        /// Directory holding mask_*.json files.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Power-series continuation of the Lyapunov function (1-D systems).
    Series {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Truncation order of every series.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Test whether the windowed level sets grow with p.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Analysis, estimates, oracle, report and overlay figure in one go.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
}

fn load_with_grid(common: &CommonArgs, grid: &GridArgs) -> Result<config::Loaded> {
    let mut loaded = config::load(common)?;
    loaded.run.merge_grid_args(grid);
    Ok(loaded)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { common, directions } => {
            let mut loaded = config::load(&common)?;
            loaded.run.directions = directions.or(loaded.run.directions);
            commands::cmd_analyze(loaded, common.out.is_some())
        }
        Command::Estimate { common, grid } => {
            let session = Session::new(load_with_grid(&common, &grid)?)?;
            commands::cmd_estimate(&session, true).map(|_| ())
        }
        Command::Oracle {
            common,
            grid,
            periodic,
        } => {
            let mut loaded = load_with_grid(&common, &grid)?;
            if let Some(spec) = periodic {
                loaded.run.periodic = Some(config::parse_p(&spec)?);
            }
            let session = Session::new(loaded)?;
            commands::cmd_oracle(&session, true).map(|_| ())
        }
        Command::Report { dir } => commands::cmd_report(&dir),
        Command::Series {
            common,
            max_steps,
            order,
        } => commands::cmd_series(config::load(&common)?, max_steps, order),
        Command::Experiment { common, grid } => {
            let session = Session::new(load_with_grid(&common, &grid)?)?;
            commands::cmd_experiment(&session, common.out.is_some())
        }
        Command::Run { common, grid } => commands::cmd_run(load_with_grid(&common, &grid)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NotApplicable>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
