use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use figsum_cli::cli::{run, Cli};
use figsum_cli::config;

fn main() -> ExitCode {
    let args = match config::apply(&Cli::command(), std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(Cli::parse_from(args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
