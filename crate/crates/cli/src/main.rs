use std::process::ExitCode;

use clap::Parser;
use thermsearch_cli::{commands, configure_threads, Cli, CliError};

fn report(err: &CliError) -> ExitCode {
    let line = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    eprintln!("{line}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    // clap prints usage and exits with 2 on bad flags
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return report(&e);
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
