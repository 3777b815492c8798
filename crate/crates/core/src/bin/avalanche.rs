//! Batch driver: `avalanche run <config> [--out DIR] [--no-adapt] [--t-end T] [--write-interval T]`.
//!
//! Exit status 0 on success, 1 for configuration or IO problems, 2 when
//! the solver aborts.

use std::path::PathBuf;
use std::process::ExitCode;

use avalanche_fv::io::{load_config, run};
use avalanche_fv::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avalanche", version, about = "Granular avalanche finite-volume solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a `key = value` config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run on the fixed base mesh.
        #[arg(long)]
        no_adapt: bool,
        /// End time (overrides `t_end`).
        #[arg(long)]
        t_end: Option<f64>,
        /// Simulated time between frames (overrides `output_interval`).
        #[arg(long)]
        write_interval: Option<f64>,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    let Command::Run {
        config,
        out,
        no_adapt,
        t_end,
        write_interval,
    } = cli.command;
    let mut cfg = load_config(&config)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if no_adapt {
        cfg.adapt = None;
    }
    if let Some(t) = t_end {
        cfg.step.t_end = t;
    }
    if let Some(dt) = write_interval {
        cfg.output_interval = dt;
    }
    let summary = run(&cfg)?;
    print!("{}", summary.render());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_abort() { 2 } else { 1 })
        }
    }
}
