//! `feastest`: nonasymptotic tests, confidence regions and noisy-LP
//! feasibility from the command line.

mod commands;
mod config;
mod data;
mod failure;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::failure::{fail, Kind};

const EXIT_CODES: &str = "\
Exit codes:
  0  command completed (whatever the test decision)
  2  usage error (bad flags or arguments)
  3  I/O error (missing or unwritable file)
  4  configuration error (malformed JSON, unknown key, invalid expression or option)
  5  data error (CSV parse failure, missing column, out-of-range values)
  6  computation failed (solver or numerical failure)

FEASTEST_SEED overrides the Monte-Carlo seed of any command.";

#[derive(Parser)]
#[command(name = "feastest", version, about = "Nonasymptotic hypothesis tests via slack minimization", after_help = EXIT_CODES)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hypothesis test and write report.json.
    Test {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the test and report the confidence region(s).
    Ci {
        #[arg(long)]
        config: PathBuf,
    },
    /// Test with responses in [0, 1] using the Rademacher threshold.
    BoundedTest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Feasibility of {θ ≥ 0 : Aθ = b}, exactly or with noisy targets.
    Farkas {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV of A with a header row.
        #[arg(long = "A", value_name = "CSV")]
        a: Option<PathBuf>,
        /// CSV with column `b` and optionally a 0/1 column `noisy`.
        #[arg(long = "b", value_name = "CSV")]
        b: Option<PathBuf>,
        /// The first N rows are observed with noise.
        #[arg(long, value_name = "N")]
        noisy_rows: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Run a simulation study and write table.csv and study_report.json.
    Simulate {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// table1_n{30,90}_L{3,4} or table2_n{30,90}_L{45,60}.
        #[arg(long)]
        preset: Option<String>,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Dimension warnings and the Gaussian-max expectation bracket.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute only the critical value and its decomposition.
    Threshold {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(fail(Kind::Config, "--threads must be at least 1"));
        }
        feastest_core::exec::set_thread_cap(t);
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Test { config } => commands::test("test", &config, out),
        Command::Ci { config } => commands::test("ci", &config, out),
        Command::BoundedTest { config } => commands::bounded_test(&config, out),
        Command::Farkas { config, a, b, noisy_rows, sigma } => {
            commands::farkas(config.as_deref(), commands::FarkasFlags { a, b, noisy_rows, sigma }, out)
        }
        Command::Simulate { config, preset, reps } => commands::simulate(config.as_deref(), preset.as_deref(), reps, out),
        Command::Diagnose { config } => commands::diagnose(&config, out),
        Command::Threshold { config } => commands::threshold(&config, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure::exit_code(&e))
        }
    }
}
