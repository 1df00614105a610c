use std::process::ExitCode;

use clap::Parser;
use skorolab_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skorolab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
