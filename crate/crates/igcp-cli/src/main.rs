mod commands;
mod config;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::{run, Cli, Outcome};
use crate::error::CliError;

fn emit(outcome: &Outcome) -> Result<(), CliError> {
    match &outcome.path {
        Some(p) => std::fs::write(p, &outcome.text)?,
        None => std::io::stdout().lock().write_all(outcome.text.as_bytes())?,
    }
    Ok(())
}

fn report(err: &CliError) -> ExitCode {
    let msg = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    eprintln!("{msg}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            if let Err(e) = emit(&outcome) {
                return report(&e);
            }
            match &outcome.failure {
                Some(e) => report(e),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => report(&e),
    }
}
