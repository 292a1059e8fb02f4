//! `collatz`: batch experiments over the accelerated 3x+1 map.
//!
//! Machine-readable output goes to stdout (or `--out-dir`), logs and the run
//! manifest to stderr. Exit codes: 0 ok, 2 bad input, 3 failed check,
//! 4 budget exceeded, 1 anything else.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::Utc;
use clap::Parser;

use commands::{Command, Format};
use manifest::{emit, timestamp, write_manifest, RunManifest, SCHEMA};

#[derive(Debug, Parser)]
#[command(name = "collatz", version = collatz_core::montecarlo::version(), about)]
struct Cli {
    /// Write outputs and manifest.json into this directory instead of stdout
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Output format (default: csv for tables, json for reports)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = Cli::parse();
    let started = Utc::now();
    let command_line: Vec<String> = std::env::args().collect();

    let run = match commands::run(&cli.command, cli.format) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };

    let out_dir = cli.out_dir.as_deref();
    let outputs = match emit(&run.outputs, out_dir) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: writing output: {e}");
            return ExitCode::from(1);
        }
    };
    let exit_code = if run.verification_failed { 3 } else { 0 };
    if run.verification_failed {
        eprintln!("error: verification failed");
    }
    let manifest = RunManifest {
        schema: SCHEMA,
        command_line,
        seed: run.seed,
        config: run.config,
        version: collatz_core::montecarlo::version().to_string(),
        started_at: timestamp(started),
        finished_at: timestamp(Utc::now()),
        exit_code,
        outputs,
    };
    if let Err(e) = write_manifest(&manifest, out_dir) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(exit_code)
}
