//! `malab`: config-driven front end for the estimate suites.
//!
//! Exit codes: 0 success, 1 suite failure, 2 validation error, 3 internal error.
//! Errors are printed to stderr as `{"error": kind, "message": text}`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use malab::harness::SuiteRegistry;
use malab::Error;

use commands::Common;

#[derive(Parser)]
#[command(name = "malab", version, about = "Numerical lab for linearized Monge-Ampere equations")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized suites and data; overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

impl From<RunFlags> for Common {
    fn from(f: RunFlags) -> Self {
        Common {
            config: f.config,
            out: f.out,
            seed: f.seed,
            jobs: f.jobs,
        }
    }
}

#[derive(Subcommand)]
enum Verb {
    /// Solve with every configured potential and write the fields.
    Solve {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run suites and write results.csv, summary.json and manifest.json.
    Verify {
        #[command(flatten)]
        flags: RunFlags,
        /// Comma-separated suite names; overrides `[run] suites`.
        #[arg(long, value_delimiter = ',')]
        suite: Option<Vec<String>>,
    },
    /// Rerun suites once per axis value and merge the results.
    Sweep {
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long, value_delimiter = ',')]
        suite: Option<Vec<String>>,
        /// One of mesh, theta, singularity, exponentP.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<String>>,
    },
    /// Print the verdict table of a finished run.
    Report {
        #[arg(long, default_value = commands::DEFAULT_OUT)]
        out: PathBuf,
        /// Config to compare against the manifest hash.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the registered suites.
    Suites,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() || matches!(e, Error::MissingOutputs(_)) {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.verb {
        Verb::Solve { flags } => commands::solve(&flags.into()),
        Verb::Verify { flags, suite } => commands::verify(&flags.into(), &suite),
        Verb::Sweep {
            flags,
            suite,
            axis,
            values,
        } => commands::sweep(&flags.into(), &suite, &axis, &values),
        Verb::Report { out, config } => commands::report(&out, config.as_deref()),
        Verb::Suites => {
            for s in SuiteRegistry::standard().iter() {
                println!("{:<18} {}{}", s.name(), s.description(), if s.randomized() { " (seeded)" } else { "" });
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
