use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use superadam::harness::{report_dir, run_experiment, selftest, ExperimentConfig, RunOptions};
use superadam::Error;

/// Config-driven runner for adaptive-gradient optimization experiments.
#[derive(Parser)]
#[command(name = "superadam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (optimizer, seed) cell of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides SUPERADAM_OUT_DIR and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel cells; overrides SUPERADAM_WORKERS and the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare the summaries found in a results directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERIC: u8 = 2;

fn fail(e: &Error) -> ExitCode {
    match e {
        Error::Validation(errs) => {
            eprintln!("configuration invalid:");
            for err in errs {
                eprintln!("  {err}");
            }
        }
        other => eprintln!("error: {other}"),
    }
    ExitCode::from(match e {
        Error::NumericAbort { .. } => EXIT_NUMERIC,
        _ => EXIT_VALIDATION,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, workers } => {
            if workers == Some(0) {
                return fail(&Error::Validation(vec!["--workers: must be at least 1".into()]));
            }
            let result = ExperimentConfig::load(&config).and_then(|cfg| {
                let opts = RunOptions { out_dir: out, workers }.with_env()?;
                run_experiment(&cfg, &opts)
            });
            match result {
                Ok(outcome) => {
                    let s = &outcome.summary;
                    for o in &s.optimizers {
                        let a = &o.aggregate;
                        let avg = a.avg_mt_mean.map_or("-".to_string(), |v| format!("{v:.6e}"));
                        let f = a.final_f_mean.map_or("-".to_string(), |v| format!("{v:.6e}"));
                        println!(
                            "{:<28} avg_Mt {avg:<14} final_f {f:<14} ok {} aborted {}",
                            o.label, a.seeds_ok, a.seeds_aborted
                        );
                    }
                    println!("results written to {}", outcome.out_dir.display());
                    if s.aborted_cells() > 0 {
                        eprintln!("{} cell(s) stopped on a non-finite value", s.aborted_cells());
                        return ExitCode::from(EXIT_NUMERIC);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Report { input } => match report_dir(&input) {
            Ok(report) => {
                print!("{}", report.to_markdown());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Selftest => {
            let results = selftest();
            let mut ok = true;
            for r in &results {
                println!("{} {:<24} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
    }
}
