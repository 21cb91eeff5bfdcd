//! `lvthermo` command-line driver.
//!
//! Exit codes: 0 success, 1 numerical failure (or failed checks), 2 bad
//! arguments or config.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Format, Output};
use config::{load_config_file, UsageError};
use lvthermo::exec::Execution;
use lvthermo::LvError;

#[derive(Debug, Parser)]
#[command(name = "lvthermo", version, about = "Orbit thermodynamics and stochastic simulation for the Lotka-Volterra system")]
struct Cli {
    /// JSON file with default values for the subcommand's options; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for grids and ensembles (0 = one per core).
    #[arg(long, global = true, env = "LVTHERMO_THREADS", default_value_t = 0)]
    threads: usize,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One closed orbit: trajectory CSV, or the orbit summary with --format json.
    Orbit(commands::OrbitFlags),
    /// Equation-of-state table over an (alpha, h) grid.
    Eos(commands::EosFlags),
    /// Level curves H = h as closed polylines.
    Contours(commands::ContourFlags),
    /// Exact jump-process paths.
    Ssa(commands::SsaFlags),
    /// Diffusion-limit paths.
    Sde(commands::SdeFlags),
    /// Averaged energy diffusion coefficients and stationary density.
    Hdiff(commands::HdiffFlags),
    /// Relative entropy over time under the flow.
    Entropy(commands::EntropyFlags),
    /// Decomposition drift sampled on a grid.
    Field(commands::FieldFlags),
    /// Run the invariant suite and print a pass/fail table.
    Check(commands::CheckFlags),
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    let file = cli.config.as_deref().map(load_config_file).transpose()?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Context { file: file.as_ref(), format: cli.format, exec };
    match &cli.command {
        Command::Orbit(f) => commands::orbit(&ctx, f),
        Command::Eos(f) => commands::eos(&ctx, f),
        Command::Contours(f) => commands::contours(&ctx, f),
        Command::Ssa(f) => commands::ssa(&ctx, f),
        Command::Sde(f) => commands::sde(&ctx, f),
        Command::Hdiff(f) => commands::hdiff(&ctx, f),
        Command::Entropy(f) => commands::entropy(&ctx, f),
        Command::Field(f) => commands::field(&ctx, f),
        Command::Check(f) => commands::check(&ctx, f),
    }
}

fn write_output(cli: &Cli, output: &Output) -> std::io::Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, &output.body)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&output.body)?;
            stdout.flush()?;
        }
    }
    if let (Command::Orbit(f), Some(summary)) = (&cli.command, &output.summary) {
        if let Some(path) = &f.summary {
            std::fs::write(path, summary)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool: {e}");
        }
    }

    let output = match run(&cli) {
        Ok(o) => o,
        Err(e) => return report(&e),
    };
    if let Err(e) = write_output(&cli, &output) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(1);
    }
    match output.failed {
        Some(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        None => ExitCode::SUCCESS,
    }
}

fn report(e: &anyhow::Error) -> ExitCode {
    if let Some(u) = e.downcast_ref::<UsageError>() {
        eprintln!("error: {u}\n\nFor more information, try '--help'.");
        ExitCode::from(2)
    } else if let Some(lv) = e.downcast_ref::<LvError>() {
        eprintln!("error: {}: {lv}", lv.name());
        ExitCode::from(1)
    } else {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    }
}
