use std::process::ExitCode;

use clap::Parser;
use crowd_metrology::cli::{run, Cli, RunConfig};
use crowd_metrology::Error;

fn main() -> ExitCode {
    let config = RunConfig::from_cli(Cli::parse());
    match run(&config) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
