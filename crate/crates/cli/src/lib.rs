//! Batch front end for `rbmo-core`: every subcommand loads a measure,
//! resolves its configuration and prints a JSON report.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod spec;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "rbmo-lab", version, about = "RBMO and T1 experiments on finite atomic measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: commands::Command,
}

/// Runs the parsed command, printing the report unless `--out` is set.
/// Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match commands::execute(&cli.command) {
        Ok(text) => {
            if cli.command.flags().out.is_none() {
                print!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
