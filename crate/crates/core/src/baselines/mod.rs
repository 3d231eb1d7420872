//! Reference optimizers for head-to-head runs, and a driver that records the
//! same metrics as the main algorithm.
//!
//! Baselines have no adaptive matrix of their own, so their measures use the
//! identity geometry (`H = I`, `γ = 1`, `ρ = 1`) with the optimizer's own
//! gradient estimate `d_t`: `M_t = ‖∇f(x_t) - d_t‖ + ‖P_X(x_t - d_t) - x_t‖`.
//! On a constrained set the next point is projected back onto it.

mod rules;

use serde::{Deserialize, Serialize};

pub use rules::{AdaBelief, Adagrad, AdagradNorm, Adam, AdamW, Amsgrad, AdaptiveSgd, Moments, Storm};

use crate::error::{Error, Result};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::metrics::{measure_mt_from_norms, RunRecord};
use crate::oracle::StochasticOracle;
use crate::rng::{stream, SeededRng};
use crate::superadam::{CallCounts, Checkpoint, LemmaSummary, OutputMode, Trajectory, FULL_STORAGE_LIMIT};
use crate::vector::ParamVector;

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn eps() -> f64 {
    1e-8
}
fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}

/// Optimizer choice and hyperparameters, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineConfig {
    Adagrad {
        eta: f64,
        #[serde(default = "yes")]
        decreasing: bool,
        #[serde(default)]
        running_sum: bool,
    },
    Adam {
        eta: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "eps")]
        eps: f64,
        #[serde(default = "yes")]
        decreasing: bool,
        #[serde(default = "yes")]
        bias_correction: bool,
    },
    Amsgrad {
        eta: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "yes")]
        decreasing: bool,
    },
    Adamw {
        eta: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "eps")]
        eps: f64,
        #[serde(default = "one")]
        alpha: f64,
        weight_decay: f64,
        #[serde(default)]
        decreasing: bool,
    },
    Adabelief {
        eta: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "eps")]
        eps: f64,
        #[serde(default = "yes")]
        decreasing: bool,
    },
    AdagradNorm {
        eta: f64,
        #[serde(default = "one")]
        b0: f64,
    },
    AdaptiveSgd {
        k: f64,
        omega: f64,
        #[serde(default)]
        eps: f64,
    },
    Storm {
        k: f64,
        omega: f64,
        c: f64,
    },
}

impl BaselineConfig {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineConfig::Adagrad { .. } => "adagrad",
            BaselineConfig::Adam { .. } => "adam",
            BaselineConfig::Amsgrad { .. } => "amsgrad",
            BaselineConfig::Adamw { .. } => "adamw",
            BaselineConfig::Adabelief { .. } => "adabelief",
            BaselineConfig::AdagradNorm { .. } => "adagrad_norm",
            BaselineConfig::AdaptiveSgd { .. } => "adaptive_sgd",
            BaselineConfig::Storm { .. } => "storm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be > 0")))
            }
        };
        let rate = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must lie in (0, 1)")))
            }
        };
        match *self {
            BaselineConfig::Adagrad { eta, .. } => positive("eta", eta),
            BaselineConfig::Adam { eta, beta1, beta2, eps, .. }
            | BaselineConfig::Adabelief { eta, beta1, beta2, eps, .. } => {
                positive("eta", eta)?;
                rate("beta1", beta1)?;
                rate("beta2", beta2)?;
                positive("eps", eps)
            }
            BaselineConfig::Amsgrad { eta, beta1, beta2, .. } => {
                positive("eta", eta)?;
                rate("beta1", beta1)?;
                rate("beta2", beta2)
            }
            BaselineConfig::Adamw {
                eta,
                beta1,
                beta2,
                eps,
                alpha,
                weight_decay,
                ..
            } => {
                positive("eta", eta)?;
                rate("beta1", beta1)?;
                rate("beta2", beta2)?;
                positive("eps", eps)?;
                positive("alpha", alpha)?;
                positive("weight_decay", weight_decay)
            }
            BaselineConfig::AdagradNorm { eta, b0 } => {
                positive("eta", eta)?;
                positive("b0", b0)
            }
            BaselineConfig::AdaptiveSgd { k, omega, eps } => {
                positive("k", k)?;
                positive("omega", omega)?;
                if eps.is_finite() && eps >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("eps", "must be >= 0"))
                }
            }
            BaselineConfig::Storm { k, omega, c } => {
                positive("k", k)?;
                positive("omega", omega)?;
                positive("c", c)
            }
        }
    }
}

/// Live optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub enum Baseline {
    Adagrad(Adagrad),
    Adam(Adam),
    Amsgrad(Amsgrad),
    AdamW(AdamW),
    AdaBelief(AdaBelief),
    AdagradNorm(AdagradNorm),
    AdaptiveSgd(AdaptiveSgd),
    Storm {
        state: Storm,
        /// `∇f(x_t; ξ_t)`, folded into the next rate.
        sample_grad: ParamVector,
    },
}

/// Outcome of one baseline iteration.
#[derive(Clone, Debug)]
pub struct BaselineStep {
    /// The optimizer's gradient estimate `d_t` at `x_t`.
    pub estimate: ParamVector,
    pub x_next: ParamVector,
    /// Stochastic-gradient calls made by this step.
    pub calls: u64,
}

impl Baseline {
    /// Builds the state; STORM draws its initial gradient here.
    pub fn new(
        cfg: &BaselineConfig,
        oracle: &dyn StochasticOracle,
        x1: &ParamVector,
        rng: &mut SeededRng,
    ) -> Result<(Self, u64)> {
        cfg.validate()?;
        let d = oracle.dim();
        let state = match *cfg {
            BaselineConfig::Adagrad {
                eta,
                decreasing,
                running_sum,
            } => Baseline::Adagrad(Adagrad::new(d, eta, decreasing, running_sum)),
            BaselineConfig::Adam {
                eta,
                beta1,
                beta2,
                eps,
                decreasing,
                bias_correction,
            } => {
                let mut a = Adam::new(d, eta, beta1, beta2, eps);
                a.decreasing = decreasing;
                a.bias_correction = bias_correction;
                Baseline::Adam(a)
            }
            BaselineConfig::Amsgrad {
                eta,
                beta1,
                beta2,
                decreasing,
            } => {
                let mut a = Amsgrad::new(d, eta, beta1, beta2);
                a.decreasing = decreasing;
                Baseline::Amsgrad(a)
            }
            BaselineConfig::Adamw {
                eta,
                beta1,
                beta2,
                eps,
                alpha,
                weight_decay,
                decreasing,
            } => {
                let mut a = AdamW::new(d, eta, beta1, beta2, eps, alpha, weight_decay);
                a.decreasing = decreasing;
                Baseline::AdamW(a)
            }
            BaselineConfig::Adabelief {
                eta,
                beta1,
                beta2,
                eps,
                decreasing,
            } => {
                let mut a = AdaBelief::new(d, eta, beta1, beta2, eps);
                a.decreasing = decreasing;
                Baseline::AdaBelief(a)
            }
            BaselineConfig::AdagradNorm { eta, b0 } => Baseline::AdagradNorm(AdagradNorm::new(eta, b0)?),
            BaselineConfig::AdaptiveSgd { k, omega, eps } => Baseline::AdaptiveSgd(AdaptiveSgd::new(k, omega, eps)),
            BaselineConfig::Storm { k, omega, c } => {
                let xi = oracle.sample(rng);
                let g1 = oracle.stoch_grad(x1, xi);
                return Ok((
                    Baseline::Storm {
                        state: Storm::new(k, omega, c, g1.clone()),
                        sample_grad: g1,
                    },
                    1,
                ));
            }
        };
        Ok((state, 0))
    }

    pub fn step(
        &mut self,
        oracle: &dyn StochasticOracle,
        x: &ParamVector,
        rng: &mut SeededRng,
    ) -> Result<BaselineStep> {
        if let Baseline::Storm { state, sample_grad } = self {
            let estimate = state.g.clone();
            let eta = state.advance_rate(sample_grad);
            let x_next = state.step_point(x, eta)?;
            let xi = oracle.sample(rng);
            let gn = oracle.stoch_grad(&x_next, xi);
            let go = oracle.stoch_grad(x, xi);
            state.update_estimate(eta, &gn, &go)?;
            *sample_grad = gn;
            return Ok(BaselineStep {
                estimate,
                x_next,
                calls: 2,
            });
        }
        let xi = oracle.sample(rng);
        let g = oracle.stoch_grad(x, xi);
        let (x_next, estimate) = match self {
            Baseline::Adagrad(s) => (s.step(x, &g)?, g),
            Baseline::Adam(s) => {
                let x_next = s.step(x, &g)?;
                (x_next, s.direction())
            }
            Baseline::Amsgrad(s) => {
                let x_next = s.step(x, &g)?;
                (x_next, ParamVector::from_vec_unchecked(s.moments.m.clone()))
            }
            Baseline::AdamW(s) => {
                let x_next = s.step(x, &g)?;
                let c1 = 1.0 - s.moments.beta1.powi(s.moments.t as i32);
                (x_next, ParamVector::from_vec_unchecked(s.moments.m.iter().map(|m| m / c1).collect()))
            }
            Baseline::AdaBelief(s) => {
                let x_next = s.step(x, &g)?;
                let c1 = 1.0 - s.moments.beta1.powi(s.moments.t as i32);
                (x_next, ParamVector::from_vec_unchecked(s.moments.m.iter().map(|m| m / c1).collect()))
            }
            Baseline::AdagradNorm(s) => (s.step(x, &g)?, g),
            Baseline::AdaptiveSgd(s) => (s.step(x, &g)?, g),
            Baseline::Storm { .. } => unreachable!("handled above"),
        };
        Ok(BaselineStep {
            estimate,
            x_next,
            calls: 1,
        })
    }
}

fn one_u64() -> u64 {
    1
}

fn yes_flag() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineRunConfig {
    pub optimizer: BaselineConfig,
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub feasible_set: Option<FeasibleSet>,
    #[serde(default)]
    pub output_mode: OutputMode,
    #[serde(default = "one_u64")]
    pub record_every: u64,
    #[serde(default = "yes_flag")]
    pub measure_every_step: bool,
    #[serde(default)]
    pub checkpoints: Vec<u64>,
}

impl BaselineRunConfig {
    pub fn new(optimizer: BaselineConfig, iterations: u64, seed: u64) -> Self {
        Self {
            optimizer,
            iterations,
            seed,
            feasible_set: None,
            output_mode: OutputMode::default(),
            record_every: 1,
            measure_every_step: true,
            checkpoints: Vec::new(),
        }
    }
}

pub fn run_baseline(oracle: &dyn StochasticOracle, cfg: &BaselineRunConfig) -> Result<Trajectory> {
    cfg.optimizer.validate()?;
    if cfg.iterations == 0 || cfg.record_every == 0 {
        return Err(Error::invalid("iterations/record_every", "must be at least 1"));
    }
    let d = oracle.dim();
    let set = cfg.feasible_set.clone().unwrap_or_else(|| oracle.domain());
    set.validate()?;
    set.check_compatible(d)?;
    let mut x = oracle.initial_point();
    if !set.contains(&x, 0.0) {
        return Err(Error::Contract("initial point lies outside the feasible set".into()));
    }
    let big_t = cfg.iterations;
    let mut rng = SeededRng::substream(cfg.seed, stream::ESTIMATOR);
    let mut output_rng = SeededRng::substream(cfg.seed, stream::OUTPUT);
    let zeta = output_rng.index(big_t) + 1;
    let (mut opt, init_calls) = Baseline::new(&cfg.optimizer, oracle, &x, &mut rng)?;
    let mut calls = CallCounts {
        estimator: init_calls,
        matrix: 0,
    };
    let store = (d as u64).saturating_mul(big_t) < FULL_STORAGE_LIMIT;
    let mut iterates = store.then(|| Vec::with_capacity(big_t as usize));
    let mut cps: Vec<u64> = cfg.checkpoints.iter().copied().filter(|&c| c >= 1 && c <= big_t).collect();
    cps.sort_unstable();
    cps.dedup();
    let mut next_cp = 0usize;
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    let (mut n, mut s_mt, mut s_gm, mut s_g) = (0u64, 0.0, 0.0, 0.0);
    let mut chain_violations = 0;
    let mut output = None;
    let mut last_valid: Option<RunRecord> = None;

    for t in 1..=big_t {
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
        if (t == zeta && cfg.output_mode == OutputMode::UniformRandomIterate)
            || (t == big_t && cfg.output_mode == OutputMode::LastIterate)
        {
            output = Some(x.clone());
        }
        let step = opt.step(oracle, &x, &mut rng)?;
        calls.estimator += step.calls;
        let mut x_next = step.x_next;
        if !set.contains(&x_next, 0.0) {
            x_next = euclidean_project(&x_next, &set)?;
        }
        if !x_next.is_finite() || !step.estimate.is_finite() {
            return Err(Error::NumericAbort {
                t,
                reason: format!("{} produced a non-finite value", cfg.optimizer.name()),
                last_valid: last_valid.map(Box::new),
            });
        }
        let recorded = (t - 1) % cfg.record_every == 0 || t == big_t;
        if recorded || cfg.measure_every_step {
            let full = oracle.full_grad(&x);
            let est_err = full.distance(&step.estimate);
            let reference = euclidean_project(&x.sub(&step.estimate), &set)?;
            let step_norm = reference.distance(&x);
            let mt = measure_mt_from_norms(est_err, step_norm, 1.0, 1.0);
            let gradmap_norm = euclidean_project(&x.sub(&full), &set)?.distance(&x);
            if gradmap_norm > mt * (1.0 + 1e-12) + 1e-300 {
                chain_violations += 1;
            }
            let grad_norm = full.norm();
            n += 1;
            s_mt += mt;
            s_gm += gradmap_norm;
            s_g += grad_norm;
            let record = RunRecord {
                t,
                f: oracle.value(&x),
                grad_norm,
                est_err,
                step_norm,
                mt,
                gradmap_norm,
                cond_h: None,
                mu: None,
                alpha: None,
                b1_slack: None,
            };
            let snapshot = |t| Checkpoint {
                t,
                avg_mt: s_mt / n as f64,
                avg_gradmap_norm: s_gm / n as f64,
                avg_grad_norm: s_g / n as f64,
                mean_h_norm_sq: 1.0,
            };
            while next_cp < cps.len() && cps[next_cp] == t {
                checkpoints.push(snapshot(t));
                next_cp += 1;
            }
            if recorded {
                records.push(record.clone());
            }
            last_valid = Some(record);
        }
        x = x_next;
    }

    Ok(Trajectory {
        records,
        iterates,
        output: output.expect("output selected during the loop"),
        zeta,
        final_point: x,
        calls,
        warnings: Vec::new(),
        checkpoints,
        averages: (n > 0).then(|| Checkpoint {
            t: big_t,
            avg_mt: s_mt / n as f64,
            avg_gradmap_norm: s_gm / n as f64,
            avg_grad_norm: s_g / n as f64,
            mean_h_norm_sq: 1.0,
        }),
        lemmas: LemmaSummary::default(),
        chain_violations,
        measured_steps: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::FiniteSumQuadratic;

    fn problem() -> FiniteSumQuadratic {
        FiniteSumQuadratic::random(4, 20, 1, 0.2, 2.0, 1.0, FeasibleSet::cube(4, 3.0).unwrap(), None).unwrap()
    }

    fn all_configs() -> Vec<BaselineConfig> {
        vec![
            BaselineConfig::Adagrad { eta: 0.1, decreasing: true, running_sum: false },
            BaselineConfig::Adam { eta: 0.05, beta1: 0.9, beta2: 0.999, eps: 1e-8, decreasing: true, bias_correction: true },
            BaselineConfig::Amsgrad { eta: 0.05, beta1: 0.9, beta2: 0.999, decreasing: true },
            BaselineConfig::Adamw { eta: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8, alpha: 1.0, weight_decay: 1e-3, decreasing: false },
            BaselineConfig::Adabelief { eta: 0.05, beta1: 0.9, beta2: 0.999, eps: 1e-8, decreasing: true },
            BaselineConfig::AdagradNorm { eta: 0.5, b0: 1.0 },
            BaselineConfig::AdaptiveSgd { k: 0.5, omega: 1.0, eps: 0.0 },
            BaselineConfig::Storm { k: 0.1, omega: 1.0, c: 10.0 },
        ]
    }

    #[test]
    fn every_baseline_runs_feasibly_and_deterministically() {
        let p = problem();
        for opt in all_configs() {
            let cfg = BaselineRunConfig::new(opt.clone(), 300, 4);
            let a = run_baseline(&p, &cfg).unwrap();
            let b = run_baseline(&p, &cfg).unwrap();
            assert_eq!(a, b, "{}", opt.name());
            assert_eq!(a.chain_violations, 0);
            for x in a.iterates.as_ref().unwrap() {
                assert!(p.domain().contains(x, 0.0));
            }
            let per = if opt.name() == "storm" { 2 } else { 1 };
            let init = if opt.name() == "storm" { 1 } else { 0 };
            assert_eq!(a.calls.estimator, per * 300 + init);
            assert!(a.records.last().unwrap().f < a.records[0].f, "{} did not decrease f", opt.name());
        }
    }

    #[test]
    fn config_json_defaults() {
        let c: BaselineConfig = serde_json::from_str(r#"{"kind":"adam","eta":0.001}"#).unwrap();
        assert_eq!(
            c,
            BaselineConfig::Adam { eta: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8, decreasing: true, bias_correction: true }
        );
        assert!(serde_json::from_str::<BaselineConfig>(r#"{"kind":"storm","k":1,"omega":1}"#).is_err());
        assert!(BaselineConfig::Storm { k: 1.0, omega: -1.0, c: 1.0 }.validate().is_err());
    }
}
