//! `decdim`: decision dimension, DEC variants, lower bounds and simulations from the
//! command line.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 infinite value (unlearnable),
//! 4 solver budget exhausted (results are still written, and flagged).

mod commands;
mod output;
mod params;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Run, Status};
use params::Params;

#[derive(Parser)]
#[command(name = "decdim", version, about = "Decision dimension and DEC toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decision dimension Ddim_Δ of a class.
    Ddim(Params),
    /// A DEC variant (--kind offset|constrained-r|constrained-p|quantile-p|quantile-r|lin-constrained|tdec|exo|ddim).
    Dec(Params),
    /// A lower bound (--kind general|fano|fano-dmso|mixmix|quantile-hellinger|ddim-sample|sandwich).
    Bound(Params),
    /// Monte Carlo runs of an algorithm against one model of the class.
    Simulate(Params),
    /// Sandwich table over a Δ grid.
    Sweep(Params),
}

fn execute(name: &str, params: Params, f: fn(&Params) -> anyhow::Result<Run>) -> anyhow::Result<Status> {
    let params = params.resolve()?;
    let digest = output::config_digest(name, &params)?;
    let run = f(&params)?;
    output::emit(&run.output, &params, name, &digest)?;
    if let Some(msg) = run.message {
        eprintln!("decdim {name}: {msg}");
    }
    Ok(run.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ddim(p) => execute("ddim", p, commands::ddim),
        Command::Dec(p) => execute("dec", p, commands::dec),
        Command::Bound(p) => execute("bound", p, commands::bound),
        Command::Simulate(p) => execute("simulate", p, commands::simulate),
        Command::Sweep(p) => execute("sweep", p, commands::sweep),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Infinite) => ExitCode::from(3),
        Ok(Status::BudgetExhausted) => ExitCode::from(4),
        Err(e) => {
            eprintln!("decdim: {e:#}");
            ExitCode::from(2)
        }
    }
}
