mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

/// sysexits(3)
pub const EX_USAGE: u8 = 64;
pub const EX_DATAERR: u8 = 65;
pub const EX_SOFTWARE: u8 = 70;
pub const EX_IOERR: u8 = 74;
pub const EX_UNCONVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EX_USAGE),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a),
        Command::Path(a) => commands::cmd_path(a),
        Command::Bench(a) => commands::cmd_bench(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gapsafe: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("Try 'gapsafe --help' for more information.");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
