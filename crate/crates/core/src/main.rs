use std::process::ExitCode;

use clap::Parser;
use midblock::cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
