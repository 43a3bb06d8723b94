//! Command-line driver for `thermsearch`: argument handling, CSV/JSON tables
//! and SVG charts.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;

pub use config::{Cli, Command, RunConfig};
pub use error::CliError;

/// Reads `THERMSEARCH_THREADS` and sizes the global worker pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("THERMSEARCH_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "THERMSEARCH_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    // fails only if a pool already exists, which is harmless
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}
