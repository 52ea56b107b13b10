//! `delta-lab`: solve, verify, sweep and check estimates from a TOML config.
//!
//! Exit codes: 0 ok, 2 configuration error (nothing written), 3 numerical
//! failure (`error.json` in the output directory), 1 I/O error.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use artifacts::Artifacts;
use commands::Failure;
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "delta-lab", version, about = "Schrödinger evolution with a time-dependent point interaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fail (exit 3) when diagnostics exceed their tolerances.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Charge, wave field and diagnostics for one problem.
    Solve,
    /// Acceptance criteria and checks of the configured problem.
    Verify,
    /// Convergence tables under grid refinement.
    Sweep,
    /// Scaling fits and ratio batteries of the Sobolev estimates.
    Lemmas,
}

fn error_kind(e: &delta_lab::LabError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Unknown").to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let overrides = Overrides { seed: cli.seed, threads: cli.threads, strict: cli.strict };
    let cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Solve => commands::cmd_solve(&cfg, &cli.out),
        Command::Verify => commands::cmd_verify(&cfg, &cli.out),
        Command::Sweep => commands::cmd_sweep(&cfg, &cli.out),
        Command::Lemmas => commands::cmd_lemmas(&cfg, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
        Err(failure) => {
            let error = match &failure {
                Failure::Numerical { stage, error } => {
                    json!({ "kind": error_kind(error), "stage": stage, "message": error.to_string() })
                }
                Failure::Checks(list) => json!({ "kind": "Checks", "stage": "checks", "message": list.join("; "), "failures": list }),
                _ => unreachable!(),
            };
            eprintln!("numerical failure: {}", error["message"].as_str().unwrap_or_default());
            match Artifacts::create(&cli.out, &cfg.hash()).and_then(|a| a.json("error.json", json!({ "error": error }))) {
                Ok(()) => ExitCode::from(3),
                Err(e) => {
                    eprintln!("i/o error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
