//! `lsa-lab`: validate LSA instances, run experiments, summarize results.
//!
//! Exit codes: 0 ok, 2 parse/structure, 3 assumption violation,
//! 4 numerical failure, 5 budget exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Parser)]
#[command(name = "lsa-lab", version, about = "Linear stochastic approximation with Polyak-Ruppert averaging: instance validation, ensembles, and finite-time bounds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every model assumption and print the derived quantities
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured experiment; writes results.csv, bounds.json, meta.json
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 = auto (overrides the config; never affects results)
        #[arg(long)]
        threads: Option<usize>,
        /// Master seed (overrides the config; LSA_LAB_SEED beats both)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a results directory: slopes, violation counts, plot data
    Report { results_dir: PathBuf },
}

fn exit_code(e: &lsa_lab::Error) -> u8 {
    use lsa_lab::Error::*;
    match e {
        Parse(_) | Config(_) | Dimension(_) | Domain(_) => 2,
        Assumption(_) => 3,
        Numerical(_) => 4,
        Budget(_) => 5,
    }
}

fn main() -> ExitCode {
    // Restore default SIGPIPE so `lsa-lab report | head` dies quietly when
    // the reader goes away instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Validate { config } => commands::cmd_validate(&config),
        Cmd::Run {
            config,
            out,
            threads,
            seed,
        } => commands::cmd_run(
            &config,
            commands::RunOverrides { out, threads, seed },
        ),
        Cmd::Report { results_dir } => commands::cmd_report(&results_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
