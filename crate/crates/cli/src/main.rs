//! `fluid`: calibrate item banks, run adaptive evaluations, compare
//! strategies over simulated training runs and plot the results.

mod compare;
mod fit;
mod report;
mod run;
mod simulate;
mod svg;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fluid", version, about)]
struct Cli {
    /// Master seed; overrides any seed in a configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// One of error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    /// Worker threads for parallel work (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate a 2PL item bank from a response matrix.
    Fit(fit::Args),
    /// Run one evaluation session against an item bank.
    Run(run::Args),
    /// Compare strategies over simulated training runs.
    Compare(compare::Args),
    /// Draw plots from the output of `compare`.
    Report(report::Args),
    /// Write a synthetic item bank and response matrix.
    Simulate(simulate::Args),
}

/// Bad input or usage, as opposed to a failure while doing the work.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(message: impl Into<String>) -> anyhow::Error {
    Invalid(message.into()).into()
}

fn exit_code(error: &anyhow::Error) -> u8 {
    use fluid_core::Error as E;
    for cause in error.chain() {
        if cause.is::<Invalid>() || cause.is::<toml::de::Error>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidItem { .. }
                | E::ItemMismatch { .. }
                | E::InvalidMatrix(_)
                | E::InvalidConfig(_)
                | E::Parse { .. }
                | E::Format { .. }
                | E::Csv(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(invalid("--threads must be positive"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();

    let result = configure_threads(cli.threads).and_then(|()| match cli.command {
        Command::Fit(args) => fit::run(args, cli.seed),
        Command::Run(args) => run::run(args, cli.seed),
        Command::Compare(args) => compare::run(args, cli.seed),
        Command::Report(args) => report::run(args),
        Command::Simulate(args) => simulate::run(args, cli.seed),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
