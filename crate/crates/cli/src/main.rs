mod cli;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, CliCommand};
use commands::Failure;
use config::{Command, RunConfig};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ABORT: u8 = 3;
const EXIT_CHECKS: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        CliCommand::Denoise(args) => RunConfig::resolve(Command::Denoise, args)
            .map_err(Failure::Usage)
            .and_then(|cfg| commands::denoise(&cfg)),
        CliCommand::Stereo(args) => RunConfig::resolve(Command::Stereo, args)
            .map_err(Failure::Usage)
            .and_then(|cfg| commands::stereo(&cfg)),
        CliCommand::Selftest(args) => commands::selftest(args.seed.unwrap_or(0), args.cases.unwrap_or(50), args.inject_wrong_adjoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = match &f {
                Failure::Usage(m) => {
                    eprintln!("error: {m}");
                    EXIT_USAGE
                }
                Failure::Runtime(m) => {
                    eprintln!("error: {m}");
                    EXIT_RUNTIME
                }
                Failure::Abort(m) => {
                    eprintln!("aborted: {m}");
                    EXIT_ABORT
                }
                Failure::ChecksFailed => {
                    eprintln!("selftest failed");
                    EXIT_CHECKS
                }
            };
            ExitCode::from(code)
        }
    }
}
