mod args;
mod commands;
mod data;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{cmd_experiment, cmd_test, ExperimentCommand};
use error::{CliError, Result};

/// `--threads`, else `XMMD_THREADS`, else the global pool.
fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("XMMD_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Usage(format!(
                "XMMD_THREADS=`{v}` is not a positive integer"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    match &cli.command {
        Command::Test(args) => cmd_test(args, threads),
        Command::NullSim(args) => cmd_experiment(ExperimentCommand::NullSim, args, threads),
        Command::PowerCurve(args) => cmd_experiment(ExperimentCommand::PowerCurve, args, threads),
        Command::Roc(args) => cmd_experiment(ExperimentCommand::Roc, args, threads),
        Command::Bench(args) => cmd_experiment(ExperimentCommand::Bench, args, threads),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xmmd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
