use std::process::ExitCode;

use clap::Parser;
use qhuff::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qhuff: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
