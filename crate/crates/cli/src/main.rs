use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    debak_cli::run(debak_cli::Cli::parse())
}
