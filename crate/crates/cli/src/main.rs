//! `patchflow` command line: run scenarios, verify invariants, write oracle fixtures.
//!
//! Exit codes: 0 success, 1 failed verification or numerical error, 2 unreadable scenario,
//! 3 requested time at or past the blow-up horizon. Errors are reported as one JSON object on stderr.

mod error;
mod pipeline;
mod plots;
mod scenario;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{CliError, CliResult};
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "patchflow", version, about = "Time-analytic patch flows of the aggregation equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engines of a scenario and write reports and plots.
    Run {
        scenario: PathBuf,
        /// Output directory; overrides the scenario's `outputs`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampling seed; overrides the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for point-parallel sweeps.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Run the invariant suite and print a pass/fail table.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the exact-solution fixture CSVs into a directory.
    OracleFixtures { dir: PathBuf },
}

fn set_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { scenario, out, seed, threads, no_plots } => {
            set_threads(threads)?;
            let sc = Scenario::load(&scenario)?;
            let out = out.or_else(|| sc.outputs.clone()).unwrap_or_else(|| PathBuf::from("patchflow-out"));
            let files = pipeline::run(&sc, &out, seed.unwrap_or(sc.seed), !no_plots)?;
            for f in files {
                println!("{}", out.join(f).display());
            }
        }
        Command::Verify { scenario, seed, threads } => {
            set_threads(threads)?;
            let sc = Scenario::load(&scenario)?;
            verify::verify(&sc, seed.unwrap_or(sc.seed))?;
        }
        Command::OracleFixtures { dir } => {
            for f in patchflow::oracle::write_fixtures(&dir)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.report();
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", report.error)));
            ExitCode::from(report.exit_code as u8)
        }
    }
}
