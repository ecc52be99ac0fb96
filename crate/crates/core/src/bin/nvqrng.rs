use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    nvqrng::cli::run(nvqrng::cli::Cli::parse())
}
