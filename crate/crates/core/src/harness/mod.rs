//! Experiment configuration, execution and reporting.

mod config;
mod report;
mod runner;
mod selftest;

pub use config::{ExperimentConfig, OptimizerSpec, SuperAdamParams};
pub use report::{compare_report, find_summaries, report_dir, Report, ReportRow};
pub use runner::{
    csv_file_name, records_to_csv, run_experiment, AbortInfo, Aggregate, BoundPoint, CellSummary,
    ExperimentOutcome, ExperimentSummary, LemmaOutcome, OptimizerSummary, RunOptions, TheoryComparison,
    B1_TOLERANCE, OUT_DIR_ENV, SUMMARY_FILE, WORKERS_ENV,
};
pub use selftest::{selftest, CheckResult};
