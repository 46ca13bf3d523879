//! Command-line front end for `slowproj`.

pub mod args;
pub mod commands;
pub mod error;
pub mod model;

use std::fs;
use std::io::Write;

pub use args::Cli;
pub use error::CliError;

/// Runs a parsed command line. Returns `Ok(false)` when the command ran but
/// reported failed checks.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let artifact = commands::execute(&cli.command)?;
    for d in &artifact.diagnostics {
        log::warn!("{d}");
    }
    match &cli.out {
        Some(path) => {
            fs::write(path, &artifact.bytes).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let report = commands::RunReport {
                command: commands::name(&cli.command).to_string(),
                inputs: artifact.inputs,
                outputs: vec![path.display().to_string()],
                diagnostics: artifact.diagnostics,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&artifact.bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    Ok(!artifact.failed)
}
