//! `wigner-gaps`: seeded, replica-parallel experiment runner.
//!
//! Exit codes: 0 success, 1 i/o error, 2 invalid configuration,
//! 3 solver non-convergence, 4 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{Command, Overrides};
use output::{Failure, RunOutput};

#[derive(Parser, Debug)]
#[command(name = "wigner-gaps", version, about = "Eigenvalue gap experiments for Wigner matrices", allow_negative_numbers = true)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON file with any of the flag fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => config::load_file(p),
        None => Ok(Overrides::default()),
    };
    let fallback_out = cli
        .flags
        .out
        .clone()
        .or_else(|| file.as_ref().ok().and_then(|f| f.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let cfg = file.and_then(|f| config::resolve(cli.command, f, cli.flags));
    let cfg = match cfg {
        Ok(c) => c,
        Err(violations) => {
            let failure = Failure::Validation(violations);
            output::write_early_error(&fallback_out, &failure);
            eprint!("{failure}");
            return ExitCode::from(failure.exit_code() as u8);
        }
    };

    let start = Instant::now();
    let out = match RunOutput::create(&cfg, commands::seed_plan(&cfg)) {
        Ok(o) => o,
        Err(f) => {
            output::write_early_error(&fallback_out, &f);
            eprintln!("{f}");
            return ExitCode::from(f.exit_code() as u8);
        }
    };
    let result = commands::run(&cfg, &out).and_then(|meta| out.write_manifest("complete", &meta));
    // Wall time and worker count live apart from the manifest so that
    // every other file is reproducible byte for byte.
    let _ = out.write_json(
        "timing.json",
        &json!({ "wall_seconds": start.elapsed().as_secs_f64(), "workers": cfg.workers }),
    );
    match result {
        Ok(()) => {
            eprintln!("{}: wrote {} (manifest {})", cfg.command.name(), out.dir().display(), &out.id()[..12]);
            ExitCode::SUCCESS
        }
        Err(f) => {
            out.fail(&f);
            eprintln!("{}: {f}", cfg.command.name());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
