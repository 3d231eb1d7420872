use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive_matrix::MatrixConfig;
use crate::baselines::{BaselineConfig, BaselineRunConfig};
use crate::error::{Error, Result};
use crate::estimator::Schedule;
use crate::feasible::FeasibleSet;
use crate::problems::{make_problem, ProblemSpec};
use crate::superadam::{LemmaChecks, OutputMode, SuperAdamConfig};

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

/// Main-algorithm hyperparameters; per-run fields come from the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperAdamParams {
    pub schedule: Schedule,
    pub matrix: MatrixConfig,
    #[serde(default)]
    pub feasible_set: Option<FeasibleSet>,
    #[serde(default)]
    pub output_mode: OutputMode,
    #[serde(default)]
    pub reuse_estimator_sample: bool,
}

/// One entry of the optimizer grid: exactly one of `superadam` / `baseline`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    /// Used in output file names; defaults to a name derived from the optimizer.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superadam: Option<SuperAdamParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    /// Projection set for a baseline; defaults to the problem domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_set: Option<FeasibleSet>,
}

impl OptimizerSpec {
    pub fn superadam(label: impl Into<String>, params: SuperAdamParams) -> Self {
        Self {
            label: Some(label.into()),
            superadam: Some(params),
            baseline: None,
            feasible_set: None,
        }
    }

    pub fn baseline(label: impl Into<String>, cfg: BaselineConfig) -> Self {
        Self {
            label: Some(label.into()),
            superadam: None,
            baseline: Some(cfg),
            feasible_set: None,
        }
    }

    pub fn resolved_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match (&self.superadam, &self.baseline) {
            (Some(p), _) => {
                format!("superadam_tau{}_{}", p.schedule.tau.as_u8(), p.matrix.case.name())
            }
            (None, Some(b)) => b.name().to_string(),
            (None, None) => "unnamed".to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match (&self.superadam, &self.baseline) {
            (Some(_), _) => "superadam",
            (None, Some(b)) => b.name(),
            (None, None) => "none",
        }
    }
}

/// A problem, an optimizer grid and a list of seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub problem: ProblemSpec,
    pub optimizers: Vec<OptimizerSpec>,
    pub iterations: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default = "yes")]
    pub measure_every_step: bool,
    #[serde(default)]
    pub lemma_checks: LemmaChecks,
    /// Horizons at which running averages, slopes and bounds are reported.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !label.starts_with('.')
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "experiment config".into(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.optimizers.is_empty() {
            errs.push("optimizers: empty".to_string());
        }
        if self.seeds.is_empty() {
            errs.push("seeds: empty".to_string());
        }
        let unique: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            errs.push("seeds: duplicate entries".to_string());
        }
        if self.iterations == 0 {
            errs.push("iterations: must be at least 1".to_string());
        }
        if self.record_every == 0 || self.record_every > self.iterations.max(1) {
            errs.push(format!(
                "record_every: {} must lie in [1, iterations = {}]",
                self.record_every, self.iterations
            ));
        }
        if let LemmaChecks::MonteCarlo { n_resamples } = self.lemma_checks {
            if n_resamples < 2 {
                errs.push("lemma_checks.n_resamples: need at least 2".to_string());
            }
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.iterations) {
            errs.push(format!("checkpoints: {c} outside [1, iterations]"));
        }
        if self.workers == Some(0) {
            errs.push("workers: must be at least 1".to_string());
        }
        let dim = match make_problem(&self.problem) {
            Ok(p) => Some(p.dim()),
            Err(e) => {
                errs.push(format!("problem: {e}"));
                None
            }
        };
        let mut labels = BTreeSet::new();
        for (i, opt) in self.optimizers.iter().enumerate() {
            let label = opt.resolved_label();
            let at = format!("optimizers[{i}] ({label})");
            if !valid_label(&label) {
                errs.push(format!("{at}: label may only contain letters, digits, '_', '-' and '.'"));
            }
            if !labels.insert(label.clone()) {
                errs.push(format!("{at}: duplicate label"));
            }
            let set = match (&opt.superadam, &opt.baseline) {
                (Some(_), Some(_)) => {
                    errs.push(format!("{at}: set exactly one of `superadam` and `baseline`"));
                    continue;
                }
                (None, None) => {
                    errs.push(format!("{at}: missing `superadam` or `baseline`"));
                    continue;
                }
                (Some(p), None) => {
                    if opt.feasible_set.is_some() {
                        errs.push(format!("{at}: put the feasible set inside `superadam`"));
                    }
                    if let Err(e) = self.superadam_run(p, 0).validate() {
                        errs.push(format!("{at}: {e}"));
                    }
                    p.feasible_set.as_ref()
                }
                (None, Some(b)) => {
                    if let Err(e) = b.validate() {
                        errs.push(format!("{at}: {e}"));
                    }
                    opt.feasible_set.as_ref()
                }
            };
            if let (Some(set), Some(d)) = (set, dim) {
                if let Err(e) = set.validate().and_then(|_| set.check_compatible(d)) {
                    errs.push(format!("{at}: feasible_set: {e}"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn superadam_run(&self, p: &SuperAdamParams, seed: u64) -> SuperAdamConfig {
        SuperAdamConfig {
            schedule: p.schedule,
            matrix: p.matrix,
            feasible_set: p.feasible_set.clone(),
            iterations: self.iterations,
            output_mode: p.output_mode,
            seed,
            reuse_estimator_sample: p.reuse_estimator_sample,
            record_every: self.record_every,
            measure_every_step: self.measure_every_step,
            lemma_checks: self.lemma_checks,
            checkpoints: self.checkpoints.clone(),
        }
    }

    pub fn baseline_run(&self, spec: &OptimizerSpec, b: &BaselineConfig, seed: u64) -> BaselineRunConfig {
        BaselineRunConfig {
            optimizer: b.clone(),
            iterations: self.iterations,
            seed,
            feasible_set: spec.feasible_set.clone(),
            output_mode: OutputMode::LastIterate,
            record_every: self.record_every,
            measure_every_step: self.measure_every_step,
            checkpoints: self.checkpoints.clone(),
        }
    }
}
