// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

use std::process::ExitCode;

use binsight::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match binsight::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
