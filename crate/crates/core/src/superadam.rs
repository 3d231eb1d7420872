//! The full adaptive-gradient driver: adaptive matrix, mirror step,
//! convex-combination update and estimator update, with per-step metrics.

use serde::{Deserialize, Serialize};

use crate::adaptive_matrix::{AdaptiveMatrix, MatrixConfig, MatrixGenerator};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, Schedule, Tau};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::metrics::{
    b1_slack, measure_mt_from_norms, monte_carlo_estimator_check, FrozenState, MonteCarloCheck,
    RunRecord,
};
use crate::mirror_step::mirror_step;
use crate::oracle::{Sample, StochasticOracle};
use crate::rng::{stream, SeededRng};
use crate::vector::ParamVector;

/// Iterates are kept in full while `d·T` stays below this many entries.
pub const FULL_STORAGE_LIMIT: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// `x_ζ` with `ζ` uniform on `{1, ..., T}`.
    UniformRandomIterate,
    /// `x_T`.
    #[default]
    LastIterate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LemmaChecks {
    #[default]
    Off,
    /// Pathwise descent-inequality slack at each measured step.
    DeterministicOnly,
    /// Additionally a resampling check of the estimator-error recursion at
    /// each recorded step.
    MonteCarlo { n_resamples: usize },
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperAdamConfig {
    pub schedule: Schedule,
    pub matrix: MatrixConfig,
    /// Defaults to the oracle's own domain.
    #[serde(default)]
    pub feasible_set: Option<FeasibleSet>,
    pub iterations: u64,
    #[serde(default)]
    pub output_mode: OutputMode,
    #[serde(default)]
    pub seed: u64,
    /// Build `H_t` from the estimator's `∇f(x_t; ξ_t)` instead of a separate draw.
    #[serde(default)]
    pub reuse_estimator_sample: bool,
    #[serde(default = "one")]
    pub record_every: u64,
    /// Compute the measures at every step rather than only at recorded ones,
    /// so running averages cover all `t`.
    #[serde(default = "yes")]
    pub measure_every_step: bool,
    #[serde(default)]
    pub lemma_checks: LemmaChecks,
    /// Horizons at which running averages are reported.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
}

impl SuperAdamConfig {
    pub fn new(schedule: Schedule, matrix: MatrixConfig, iterations: u64, seed: u64) -> Self {
        Self {
            schedule,
            matrix,
            feasible_set: None,
            iterations,
            output_mode: OutputMode::default(),
            seed,
            reuse_estimator_sample: false,
            record_every: 1,
            measure_every_step: true,
            lemma_checks: LemmaChecks::Off,
            checkpoints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.matrix.validate()?;
        if let Some(set) = &self.feasible_set {
            set.validate()?;
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be at least 1"));
        }
        if let LemmaChecks::MonteCarlo { n_resamples } = self.lemma_checks {
            if n_resamples < 2 {
                return Err(Error::invalid("n_resamples", "need at least 2"));
            }
        }
        Ok(())
    }
}

/// Stochastic-gradient calls made by a run, split by purpose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub estimator: u64,
    pub matrix: u64,
}

impl CallCounts {
    pub fn total(&self) -> u64 {
        self.estimator + self.matrix
    }
}

/// Structured diagnostic emitted when supplied constants leave a theorem's
/// parameter region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

/// Running averages over `t = 1..T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub avg_mt: f64,
    pub avg_gradmap_norm: f64,
    pub avg_grad_norm: f64,
    pub mean_h_norm_sq: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    /// Steps at which the descent slack was evaluated.
    pub b1_checked: u64,
    /// Subset of those where `γ ≤ ρ/(2Lμ_t)` holds, so the slack must be nonnegative.
    pub b1_applicable: u64,
    pub b1_min_slack: Option<f64>,
    pub b1_min_applicable_slack: Option<f64>,
    pub monte_carlo: Vec<(u64, MonteCarloCheck)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<RunRecord>,
    /// `x_1..x_T`, absent when thinned.
    pub iterates: Option<Vec<ParamVector>>,
    pub output: ParamVector,
    /// The `ζ` drawn for uniform output (always drawn, so streams do not
    /// depend on the output mode).
    pub zeta: u64,
    /// `x_{T+1}`, produced by the last update.
    pub final_point: ParamVector,
    pub calls: CallCounts,
    pub warnings: Vec<Warning>,
    pub checkpoints: Vec<Checkpoint>,
    /// Averages over every measured step.
    pub averages: Option<Checkpoint>,
    pub lemmas: LemmaSummary,
    /// Number of measured steps where `‖G_X(x_t, ∇f(x_t), γ)‖ > M_t`.
    pub chain_violations: u64,
    pub measured_steps: u64,
}

/// Everything produced by one iteration.
#[derive(Clone, Debug)]
pub struct StepInfo {
    pub t: u64,
    pub x: ParamVector,
    pub g: ParamVector,
    pub h: AdaptiveMatrix,
    pub x_tilde: ParamVector,
    pub step_norm: f64,
    pub x_next: ParamVector,
    pub mu: f64,
    pub alpha: f64,
    /// Running minimum of `λ_min(H_s)` for `s ≤ t`.
    pub rho: f64,
}

/// Explicit iteration state; [`run`] drives it to completion.
#[derive(Clone)]
pub struct SuperAdam<'a> {
    oracle: &'a dyn StochasticOracle,
    schedule: Schedule,
    set: FeasibleSet,
    reuse: bool,
    generator: MatrixGenerator,
    estimator: EstimatorState,
    x: ParamVector,
    x_prev: Option<ParamVector>,
    /// `∇f(x_t; ξ_t)` from the last estimator update.
    sample_grad: ParamVector,
    /// `∇f(x_{t-1}; ξ_t)` from the last estimator update, when computed.
    sample_grad_prev: Option<ParamVector>,
    /// `ξ_t`.
    last_sample: Sample,
    rng_estimator: SeededRng,
    rng_matrix: SeededRng,
    rho: f64,
    calls: CallCounts,
}

impl<'a> SuperAdam<'a> {
    /// Initializes `x_1` and `g_1 = ∇f(x_1; ξ_1)`.
    pub fn new(oracle: &'a dyn StochasticOracle, cfg: &SuperAdamConfig) -> Result<Self> {
        Self::with_start(oracle, cfg, oracle.initial_point())
    }

    pub fn with_start(
        oracle: &'a dyn StochasticOracle,
        cfg: &SuperAdamConfig,
        x1: ParamVector,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = oracle.dim();
        x1.check_dim(d)?;
        let set = cfg.feasible_set.clone().unwrap_or_else(|| oracle.domain());
        set.check_compatible(d)?;
        if !set.contains(&x1, 0.0) {
            return Err(Error::Contract("initial point lies outside the feasible set".into()));
        }
        let generator = MatrixGenerator::new(cfg.matrix, d)?;
        let mut rng_estimator = SeededRng::substream(cfg.seed, stream::ESTIMATOR);
        let xi = oracle.sample(&mut rng_estimator);
        let g1 = oracle.stoch_grad(&x1, xi);
        if !g1.is_finite() {
            return Err(Error::NumericAbort {
                t: 1,
                reason: "initial stochastic gradient is not finite".into(),
                last_valid: None,
            });
        }
        Ok(Self {
            oracle,
            schedule: cfg.schedule,
            set,
            reuse: cfg.reuse_estimator_sample,
            generator,
            estimator: EstimatorState::new(g1.clone()),
            x: x1,
            x_prev: None,
            sample_grad: g1,
            sample_grad_prev: None,
            last_sample: xi,
            rng_estimator,
            rng_matrix: SeededRng::substream(cfg.seed, stream::MATRIX),
            rho: f64::INFINITY,
            calls: CallCounts {
                estimator: 1,
                matrix: 0,
            },
        })
    }

    pub fn t(&self) -> u64 {
        self.estimator.t()
    }

    pub fn x(&self) -> &ParamVector {
        &self.x
    }

    pub fn estimate(&self) -> &ParamVector {
        self.estimator.estimate()
    }

    pub fn calls(&self) -> CallCounts {
        self.calls
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn matrix(&mut self) -> Result<AdaptiveMatrix> {
        let oracle = self.oracle;
        let case3 = self.generator.config().case.needs_previous_point();
        if !case3 {
            let grad = if self.reuse {
                self.sample_grad.clone()
            } else {
                self.calls.matrix += 1;
                let xi = oracle.sample(&mut self.rng_matrix);
                oracle.stoch_grad(&self.x, xi)
            };
            return self.generator.generate(&self.x, &grad, None);
        }
        let Some(x_prev) = self.x_prev.clone() else {
            return self.generator.generate_case3_initial();
        };
        let (grad_t, grad_prev) = if self.reuse {
            let prev = match self.sample_grad_prev.clone() {
                Some(p) => p,
                None => {
                    self.calls.matrix += 1;
                    oracle.stoch_grad(&x_prev, self.last_sample)
                }
            };
            (self.sample_grad.clone(), prev)
        } else {
            self.calls.matrix += 2;
            let xi = oracle.sample(&mut self.rng_matrix);
            (oracle.stoch_grad(&self.x, xi), oracle.stoch_grad(&x_prev, xi))
        };
        self.generator.generate_case3(&self.x, &x_prev, &grad_t, &grad_prev)
    }

    /// One pass of the loop body at the current `t`; advances to `t + 1`.
    pub fn step(&mut self) -> Result<StepInfo> {
        let t = self.t();
        let h = self.matrix()?;
        self.rho = self.rho.min(h.smallest_eigenvalue());
        let g = self.estimator.estimate().clone();
        let gamma = self.schedule.gamma;
        let ms = mirror_step(&self.x, &g, &h, gamma, &self.set)?;
        let mu = self.schedule.mu(t);
        let mut x_next = self.x.lerp(&ms.x_tilde, mu);
        if !self.set.contains(&x_next, 0.0) {
            // only rounding can leave a convex set here
            x_next = euclidean_project(&x_next, &self.set)?;
        }
        if !x_next.is_finite() || !ms.x_tilde.is_finite() {
            return Err(Error::NumericAbort {
                t,
                reason: "iterate became non-finite".into(),
                last_valid: None,
            });
        }

        let oracle = self.oracle;
        let xi = oracle.sample(&mut self.rng_estimator);
        let gn = oracle.stoch_grad(&x_next, xi);
        self.calls.estimator += 1;
        let go = match self.schedule.tau {
            Tau::VarianceReduced => {
                self.calls.estimator += 1;
                Some(oracle.stoch_grad(&self.x, xi))
            }
            Tau::Momentum => None,
        };
        let alpha = self.schedule.alpha(t);
        self.estimator
            .update_with_alpha(self.schedule.tau, alpha, &gn, go.as_ref())?;
        if !self.estimator.estimate().is_finite() {
            return Err(Error::NumericAbort {
                t,
                reason: "gradient estimate became non-finite".into(),
                last_valid: None,
            });
        }

        let x_t = std::mem::replace(&mut self.x, x_next.clone());
        self.x_prev = Some(x_t.clone());
        self.sample_grad = gn;
        self.sample_grad_prev = go;
        self.last_sample = xi;
        Ok(StepInfo {
            t,
            x: x_t,
            g,
            h,
            x_tilde: ms.x_tilde,
            step_norm: ms.step_norm,
            x_next,
            mu,
            alpha,
            rho: self.rho,
        })
    }
}

/// Theorem step-size conditions checked with `ρ = λ`; needs a known `L`.
pub fn theorem_warnings(cfg: &SuperAdamConfig, smoothness: Option<f64>) -> Vec<Warning> {
    let Some(l) = smoothness else {
        return Vec::new();
    };
    let s = &cfg.schedule;
    let rho = cfg.matrix.lambda;
    let (limit, code, text) = match s.tau {
        Tau::VarianceReduced => (
            rho * s.m.cbrt() / (4.0 * s.k * l),
            "gamma_above_variance_reduced_limit",
            "rho m^(1/3) / (4 k L)",
        ),
        Tau::Momentum => (
            rho * s.m.sqrt() / (8.0 * l * s.k),
            "gamma_above_momentum_limit",
            "rho m^(1/2) / (8 L k)",
        ),
    };
    if s.gamma > limit {
        vec![Warning {
            code: code.into(),
            message: format!("gamma = {} exceeds {text} = {limit} (rho = lambda = {rho}, L = {l})", s.gamma),
        }]
    } else {
        Vec::new()
    }
}

/// Output selection: `x_ζ` for `ζ` uniform on `{1..T}`, or `x_T`.
pub fn select_output(iterates: &[ParamVector], mode: OutputMode, rng: &mut SeededRng) -> Result<ParamVector> {
    if iterates.is_empty() {
        return Err(Error::Contract("empty trajectory".into()));
    }
    Ok(match mode {
        OutputMode::LastIterate => iterates[iterates.len() - 1].clone(),
        OutputMode::UniformRandomIterate => iterates[rng.index(iterates.len() as u64) as usize].clone(),
    })
}

struct Accumulator {
    count: u64,
    mt: f64,
    gradmap: f64,
    grad: f64,
    h_sq: f64,
}

impl Accumulator {
    fn snapshot(&self, t: u64) -> Checkpoint {
        let n = self.count.max(1) as f64;
        Checkpoint {
            t,
            avg_mt: self.mt / n,
            avg_gradmap_norm: self.gradmap / n,
            avg_grad_norm: self.grad / n,
            mean_h_norm_sq: self.h_sq / n,
        }
    }
}

pub fn run(oracle: &dyn StochasticOracle, cfg: &SuperAdamConfig) -> Result<Trajectory> {
    run_from(oracle, cfg, oracle.initial_point())
}

pub fn run_from(oracle: &dyn StochasticOracle, cfg: &SuperAdamConfig, x1: ParamVector) -> Result<Trajectory> {
    let mut state = SuperAdam::with_start(oracle, cfg, x1)?;
    let meta = oracle.metadata();
    let warnings = theorem_warnings(cfg, meta.smoothness);
    let big_t = cfg.iterations;
    let d = oracle.dim() as u64;
    let store = d.saturating_mul(big_t) < FULL_STORAGE_LIMIT;
    let mut output_rng = SeededRng::substream(cfg.seed, stream::OUTPUT);
    let zeta = output_rng.index(big_t) + 1;
    let mut mc_rng = SeededRng::substream(cfg.seed, stream::MONTE_CARLO);
    let lambda = cfg.matrix.lambda;
    let gamma = cfg.schedule.gamma;

    let mut iterates = store.then(|| Vec::with_capacity(big_t as usize));
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    let mut cps: Vec<u64> = cfg.checkpoints.iter().copied().filter(|&c| c >= 1 && c <= big_t).collect();
    cps.sort_unstable();
    cps.dedup();
    let mut next_cp = 0usize;
    let mut acc = Accumulator {
        count: 0,
        mt: 0.0,
        gradmap: 0.0,
        grad: 0.0,
        h_sq: 0.0,
    };
    let mut lemmas = LemmaSummary::default();
    let mut chain_violations = 0u64;
    let mut output = None;
    let mut last_valid: Option<RunRecord> = None;
    let mut cached_f: Option<f64> = None;

    for t in 1..=big_t {
        if let Some(it) = iterates.as_mut() {
            it.push(state.x().clone());
        }
        if t == zeta && cfg.output_mode == OutputMode::UniformRandomIterate {
            output = Some(state.x().clone());
        }
        if t == big_t && cfg.output_mode == OutputMode::LastIterate {
            output = Some(state.x().clone());
        }
        let info = match state.step() {
            Ok(info) => info,
            Err(Error::NumericAbort { t, reason, .. }) => {
                return Err(Error::NumericAbort {
                    t,
                    reason,
                    last_valid: last_valid.map(Box::new),
                })
            }
            Err(e) => return Err(e),
        };
        let recorded = (t - 1) % cfg.record_every == 0 || t == big_t;
        if !(recorded || cfg.measure_every_step) {
            cached_f = None;
            continue;
        }

        let f_t = cached_f.unwrap_or_else(|| oracle.value(&info.x));
        let full = oracle.full_grad(&info.x);
        let grad_norm = full.norm();
        let est_err = full.distance(&info.g);
        let mt = measure_mt_from_norms(est_err, info.step_norm, lambda, gamma);
        let gradmap_norm = mirror_step(&info.x, &full, &info.h, gamma, state.feasible_set())?.step_norm / gamma;
        // tolerance covers rounding in the two subproblem solves
        if gradmap_norm > mt * (1.0 + 1e-12) + 1e-300 {
            chain_violations += 1;
        }
        let h_norm = info.h.spectral_norm();
        let slack = if cfg.lemma_checks == LemmaChecks::Off {
            cached_f = None;
            None
        } else {
            let f_next = oracle.value(&info.x_next);
            cached_f = Some(f_next);
            let s = b1_slack(f_t, f_next, est_err, info.step_norm, info.mu, gamma, info.rho);
            lemmas.b1_checked += 1;
            lemmas.b1_min_slack = Some(lemmas.b1_min_slack.map_or(s, |m: f64| m.min(s)));
            if let Some(l) = meta.smoothness {
                if gamma <= info.rho / (2.0 * l * info.mu) {
                    lemmas.b1_applicable += 1;
                    lemmas.b1_min_applicable_slack =
                        Some(lemmas.b1_min_applicable_slack.map_or(s, |m: f64| m.min(s)));
                }
            }
            Some(s)
        };
        let record = RunRecord {
            t,
            f: f_t,
            grad_norm,
            est_err,
            step_norm: info.step_norm,
            mt,
            gradmap_norm,
            cond_h: Some(h_norm / info.rho),
            mu: Some(info.mu),
            alpha: Some(info.alpha),
            b1_slack: slack,
        };
        if cfg.measure_every_step || recorded {
            acc.count += 1;
            acc.mt += mt;
            acc.gradmap += gradmap_norm;
            acc.grad += grad_norm;
            acc.h_sq += h_norm * h_norm;
        }
        while next_cp < cps.len() && cps[next_cp] == t {
            checkpoints.push(acc.snapshot(t));
            next_cp += 1;
        }
        if recorded {
            if let LemmaChecks::MonteCarlo { n_resamples } = cfg.lemma_checks {
                let frozen = FrozenState {
                    x: info.x.clone(),
                    x_tilde: info.x_tilde.clone(),
                    g: info.g.clone(),
                    mu: info.mu,
                    alpha: info.alpha,
                };
                let check =
                    monte_carlo_estimator_check(oracle, cfg.schedule.tau, &frozen, n_resamples, &mut mc_rng)?;
                lemmas.monte_carlo.push((t, check));
            }
            records.push(record.clone());
        }
        last_valid = Some(record);
    }

    let measured_steps = acc.count;
    Ok(Trajectory {
        records,
        iterates,
        output: output.expect("output selected during the loop"),
        zeta,
        final_point: state.x().clone(),
        calls: state.calls(),
        warnings,
        checkpoints,
        averages: (measured_steps > 0).then(|| acc.snapshot(big_t)),
        lemmas,
        chain_violations,
        measured_steps,
    })
}
