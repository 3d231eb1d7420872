use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Tau;
use crate::metrics::{
    slope_estimate, vr_rate_bound, vr_rate_conditions, momentum_rate_bound, momentum_rate_conditions, RunRecord,
    TheoryConstants, CSV_HEADER,
};
use crate::oracle::{CountingOracle, StochasticOracle};
use crate::problems::{make_problem, ProblemSpec};
use crate::superadam::{CallCounts, Checkpoint, LemmaChecks, Trajectory, Warning};

use super::config::{ExperimentConfig, OptimizerSpec};

pub const OUT_DIR_ENV: &str = "SUPERADAM_OUT_DIR";
pub const WORKERS_ENV: &str = "SUPERADAM_WORKERS";
pub const SUMMARY_FILE: &str = "summary.json";

/// Smallest descent slack still counted as a pass (rounding allowance).
pub const B1_TOLERANCE: f64 = -1e-9;

/// Output directory and parallelism, resolved as
/// command line > environment > config file > default.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunOptions {
    /// Fills unset fields from the environment.
    pub fn with_env(mut self) -> Result<Self> {
        if self.out_dir.is_none() {
            if let Some(v) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
                self.out_dir = Some(PathBuf::from(v));
            }
        }
        if self.workers.is_none() {
            if let Ok(v) = std::env::var(WORKERS_ENV) {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Validation(vec![format!("{WORKERS_ENV}: `{v}` is not a positive integer")]))?;
                if n == 0 {
                    return Err(Error::Validation(vec![format!("{WORKERS_ENV}: must be at least 1")]));
                }
                self.workers = Some(n);
            }
        }
        Ok(self)
    }

    pub fn resolve(&self, cfg: &ExperimentConfig) -> (PathBuf, usize) {
        let out = self
            .out_dir
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| {
                let name = if cfg.name.is_empty() { "experiment" } else { &cfg.name };
                PathBuf::from("results").join(name)
            });
        let workers = self
            .workers
            .or(cfg.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        (out, workers.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub t: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaOutcome {
    pub b1_checked: u64,
    pub b1_applicable: u64,
    pub b1_min_applicable_slack: Option<f64>,
    pub monte_carlo_checked: u64,
    pub monte_carlo_failed: u64,
    pub monte_carlo_min_slack: Option<f64>,
    pub passed: bool,
}

impl LemmaOutcome {
    fn from_trajectory(traj: &Trajectory) -> Self {
        let l = &traj.lemmas;
        let failed = l.monte_carlo.iter().filter(|(_, c)| !c.passed()).count() as u64;
        let mc_min = l.monte_carlo.iter().map(|(_, c)| c.slack).reduce(f64::min);
        let b1_ok = l.b1_min_applicable_slack.is_none_or(|s| s >= B1_TOLERANCE);
        Self {
            b1_checked: l.b1_checked,
            b1_applicable: l.b1_applicable,
            b1_min_applicable_slack: l.b1_min_applicable_slack,
            monte_carlo_checked: l.monte_carlo.len() as u64,
            monte_carlo_failed: failed,
            monte_carlo_min_slack: mc_min,
            passed: b1_ok && failed == 0,
        }
    }
}

/// Per-(optimizer, seed) results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub seed: u64,
    pub csv: String,
    pub abort: Option<AbortInfo>,
    /// `f` and `‖∇f‖` at the returned point.
    pub final_f: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub averages: Option<Checkpoint>,
    pub checkpoints: Vec<Checkpoint>,
    /// Stochastic-gradient calls made by the optimizer.
    pub calls: CallCounts,
    /// Stochastic-gradient calls seen by the oracle, diagnostics included.
    pub oracle_calls: u64,
    pub chain_violations: u64,
    pub measured_steps: u64,
    pub lemmas: Option<LemmaOutcome>,
    pub warnings: Vec<Warning>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub t: u64,
    pub avg_mt: f64,
    pub bound: f64,
}

/// Seed-averaged running mean of `M_t` against the worst-case bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryComparison {
    /// `variance_reduced` for the variance-reduced estimator, `momentum` for momentum.
    pub bound: String,
    pub constants: Option<TheoryConstants>,
    /// Unmet conditions or unknown constants; when non-empty no bound is evaluated.
    pub conditions_violated: Vec<String>,
    pub points: Vec<BoundPoint>,
    pub within: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds_ok: usize,
    pub seeds_aborted: usize,
    pub final_f_mean: Option<f64>,
    pub final_f_std: Option<f64>,
    pub avg_mt_mean: Option<f64>,
    pub avg_mt_std: Option<f64>,
    pub avg_gradmap_norm_mean: Option<f64>,
    pub avg_grad_norm_mean: Option<f64>,
    pub calls_mean: Option<f64>,
    /// `(T, seed-averaged (1/T)Σ M_t)`.
    pub series: Vec<(u64, f64)>,
    pub slope: Option<f64>,
    pub slope_note: Option<String>,
    pub chain_violations: u64,
    pub measured_steps: u64,
    pub lemmas_passed: Option<bool>,
    pub theory: Option<TheoryComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub label: String,
    pub kind: String,
    pub spec: OptimizerSpec,
    pub cells: Vec<CellSummary>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub problem: ProblemSpec,
    pub problem_kind: String,
    pub dim: usize,
    pub iterations: u64,
    pub seeds: Vec<u64>,
    pub optimizers: Vec<OptimizerSummary>,
}

impl ExperimentSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn aborted_cells(&self) -> usize {
        self.optimizers.iter().map(|o| o.aggregate.seeds_aborted).sum()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub summary: ExperimentSummary,
}

pub fn csv_file_name(label: &str, seed: u64) -> String {
    format!("{label}__seed{seed}.csv")
}

/// Header plus one line per record.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: "serializing results".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

enum CellOutput {
    Done(Box<Trajectory>),
    Aborted(AbortInfo, Option<RunRecord>),
}

fn run_cell(
    cfg: &ExperimentConfig,
    oracle: &dyn StochasticOracle,
    spec: &OptimizerSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<CellSummary> {
    let counted = CountingOracle::new(oracle);
    let result = match (&spec.superadam, &spec.baseline) {
        (Some(p), _) => crate::superadam::run(&counted, &cfg.superadam_run(p, seed)),
        (None, Some(b)) => crate::baselines::run_baseline(&counted, &cfg.baseline_run(spec, b, seed)),
        (None, None) => return Err(Error::Validation(vec!["optimizer missing".into()])),
    };
    let outcome = match result {
        Ok(traj) => CellOutput::Done(Box::new(traj)),
        Err(Error::NumericAbort { t, reason, last_valid }) => {
            CellOutput::Aborted(AbortInfo { t, reason }, last_valid.map(|r| *r))
        }
        Err(e) => return Err(e),
    };
    let label = spec.resolved_label();
    let csv = csv_file_name(&label, seed);
    let oracle_calls = counted.stoch_grad_calls();
    match outcome {
        CellOutput::Done(traj) => {
            write_file(&out_dir.join(&csv), records_to_csv(&traj.records).as_bytes())?;
            let lemmas = (spec.superadam.is_some() && cfg.lemma_checks != LemmaChecks::Off)
                .then(|| LemmaOutcome::from_trajectory(&traj));
            Ok(CellSummary {
                seed,
                csv,
                abort: None,
                final_f: Some(oracle.value(&traj.output)),
                final_grad_norm: Some(oracle.full_grad(&traj.output).norm()),
                averages: traj.averages,
                checkpoints: traj.checkpoints.clone(),
                calls: traj.calls,
                oracle_calls,
                chain_violations: traj.chain_violations,
                measured_steps: traj.measured_steps,
                lemmas,
                warnings: traj.warnings.clone(),
            })
        }
        CellOutput::Aborted(info, last) => {
            let rows: Vec<RunRecord> = last.into_iter().collect();
            write_file(&out_dir.join(&csv), records_to_csv(&rows).as_bytes())?;
            Ok(CellSummary {
                seed,
                csv,
                abort: Some(info),
                final_f: None,
                final_grad_norm: None,
                averages: None,
                checkpoints: Vec::new(),
                calls: CallCounts::default(),
                oracle_calls,
                chain_violations: 0,
                measured_steps: 0,
                lemmas: None,
                warnings: Vec::new(),
            })
        }
    }
}

/// `(T, avg_mt)` per horizon: the requested checkpoints plus the full run.
fn cell_series(cell: &CellSummary) -> Vec<(u64, f64)> {
    let mut s: Vec<(u64, f64)> = cell.checkpoints.iter().map(|c| (c.t, c.avg_mt)).collect();
    if let Some(a) = cell.averages {
        if s.last().is_none_or(|&(t, _)| t != a.t) {
            s.push((a.t, a.avg_mt));
        }
    }
    s
}

fn theory_comparison(
    oracle: &dyn StochasticOracle,
    spec: &OptimizerSpec,
    series: &[(u64, f64)],
) -> Option<TheoryComparison> {
    let p = spec.superadam.as_ref()?;
    let bound = match p.schedule.tau {
        Tau::VarianceReduced => "variance_reduced",
        Tau::Momentum => "momentum",
    };
    let meta = oracle.metadata();
    let mut missing = Vec::new();
    if meta.smoothness.is_none() {
        missing.push("smoothness unknown".to_string());
    }
    if meta.noise_sigma.is_none() {
        missing.push("noise_sigma unknown".to_string());
    }
    if meta.f_star_lower_bound.is_none() {
        missing.push("f_star lower bound unknown".to_string());
    }
    if !missing.is_empty() {
        return Some(TheoryComparison {
            bound: bound.into(),
            constants: None,
            conditions_violated: missing,
            points: Vec::new(),
            within: None,
        });
    }
    let cs = TheoryConstants {
        f1: oracle.value(&oracle.initial_point()),
        f_star: meta.f_star_lower_bound.unwrap_or_default(),
        rho: p.matrix.lambda,
        gamma: p.schedule.gamma,
        k: p.schedule.k,
        m: p.schedule.m,
        c: p.schedule.c,
        sigma: meta.noise_sigma.unwrap_or_default(),
        smoothness: meta.smoothness.unwrap_or_default(),
    };
    let conditions = match p.schedule.tau {
        Tau::VarianceReduced => vr_rate_conditions(&cs),
        Tau::Momentum => momentum_rate_conditions(&cs),
    };
    let mut points = Vec::new();
    if conditions.is_empty() {
        for &(t, avg) in series {
            let b = match p.schedule.tau {
                Tau::VarianceReduced => vr_rate_bound(&cs, t),
                Tau::Momentum => momentum_rate_bound(&cs, t),
            };
            if let Ok(bound) = b {
                points.push(BoundPoint { t, avg_mt: avg, bound });
            }
        }
    }
    let within = (!points.is_empty()).then(|| points.iter().all(|p| p.avg_mt <= p.bound));
    Some(TheoryComparison {
        bound: bound.into(),
        constants: Some(cs),
        conditions_violated: conditions,
        points,
        within,
    })
}

fn aggregate(oracle: &dyn StochasticOracle, spec: &OptimizerSpec, cells: &[CellSummary]) -> Aggregate {
    let ok: Vec<&CellSummary> = cells.iter().filter(|c| c.abort.is_none()).collect();
    let collect = |f: &dyn Fn(&CellSummary) -> Option<f64>| ok.iter().filter_map(|c| f(c)).collect::<Vec<f64>>();
    let (final_f_mean, final_f_std) = mean_std(&collect(&|c| c.final_f));
    let (avg_mt_mean, avg_mt_std) = mean_std(&collect(&|c| c.averages.map(|a| a.avg_mt)));
    let (avg_gradmap_norm_mean, _) = mean_std(&collect(&|c| c.averages.map(|a| a.avg_gradmap_norm)));
    let (avg_grad_norm_mean, _) = mean_std(&collect(&|c| c.averages.map(|a| a.avg_grad_norm)));
    let (calls_mean, _) = mean_std(&collect(&|c| Some(c.calls.total() as f64)));

    let mut series = Vec::new();
    if let Some(first) = ok.first() {
        let base = cell_series(first);
        for (i, &(t, _)) in base.iter().enumerate() {
            let vals: Vec<f64> = ok
                .iter()
                .filter_map(|c| cell_series(c).get(i).filter(|p| p.0 == t).map(|p| p.1))
                .collect();
            if vals.len() == ok.len() {
                series.push((t, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t as f64, v)).collect();
    let (slope, slope_note) = match slope_estimate(&pts) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let lemma_flags: Vec<bool> = ok.iter().filter_map(|c| c.lemmas.as_ref().map(|l| l.passed)).collect();
    Aggregate {
        seeds_ok: ok.len(),
        seeds_aborted: cells.len() - ok.len(),
        final_f_mean,
        final_f_std,
        avg_mt_mean,
        avg_mt_std,
        avg_gradmap_norm_mean,
        avg_grad_norm_mean,
        calls_mean,
        slope,
        slope_note,
        chain_violations: ok.iter().map(|c| c.chain_violations).sum(),
        measured_steps: ok.iter().map(|c| c.measured_steps).sum(),
        lemmas_passed: (!lemma_flags.is_empty()).then(|| lemma_flags.iter().all(|&b| b)),
        theory: theory_comparison(oracle, spec, &series),
        series,
    }
}

/// Runs every (optimizer, seed) cell, writes one CSV per cell plus
/// `summary.json` and `config.json`, and returns the summary. Numeric aborts
/// are recorded in the summary rather than returned as errors.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (out_dir, workers) = opts.resolve(cfg);
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let oracle = make_problem(&cfg.problem)?;
    let oracle: &dyn StochasticOracle = &*oracle;

    let cells: Vec<(usize, u64)> = (0..cfg.optimizers.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    let results: Vec<Result<CellSummary>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, seed)| run_cell(cfg, oracle, &cfg.optimizers[i], seed, &out_dir))
            .collect()
    });

    let mut per_opt: Vec<Vec<CellSummary>> = vec![Vec::new(); cfg.optimizers.len()];
    for (&(i, _), r) in cells.iter().zip(results) {
        per_opt[i].push(r?);
    }
    let optimizers = cfg
        .optimizers
        .iter()
        .zip(per_opt)
        .map(|(spec, cells)| OptimizerSummary {
            label: spec.resolved_label(),
            kind: spec.kind().to_string(),
            spec: spec.clone(),
            aggregate: aggregate(oracle, spec, &cells),
            cells,
        })
        .collect();
    let summary = ExperimentSummary {
        name: cfg.name.clone(),
        problem: cfg.problem.clone(),
        problem_kind: cfg.problem.kind_name().to_string(),
        dim: oracle.dim(),
        iterations: cfg.iterations,
        seeds: cfg.seeds.clone(),
        optimizers,
    };
    write_file(&out_dir.join(SUMMARY_FILE), to_pretty_json(&summary)?.as_bytes())?;
    write_file(&out_dir.join("config.json"), to_pretty_json(cfg)?.as_bytes())?;
    Ok(ExperimentOutcome { out_dir, summary })
}
