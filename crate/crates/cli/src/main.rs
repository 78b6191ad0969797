use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ambit_cli::app::run(ambit_cli::app::Cli::parse())
}
