use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use qrelay_cli::{execute_with_workers, render, Cli};
use qrelay_core::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e.message());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let report = execute_with_workers(cli.command, &cli.options)?;
    let text = render(&report, cli.options.format)?;
    match &cli.options.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
