//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion ids (e.g. `C3 C8`) as
//! arguments to run a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use superadam::adaptive_matrix::{AdaptiveMatrix, MatrixCase, MatrixConfig, MatrixGenerator};
use superadam::baselines::{run_baseline, BaselineConfig, BaselineRunConfig, Storm};
use superadam::estimator::{EstimatorState, Schedule, Tau};
use superadam::feasible::{euclidean_project, FeasibleSet};
use superadam::harness::{run_experiment, ExperimentConfig, ExperimentSummary, OptimizerSpec, RunOptions, SuperAdamParams};
use superadam::metrics::{
    estimator_error_bound, monte_carlo_estimator_check, vr_rate_conditions, momentum_rate_conditions, FrozenState,
    RunRecord, CSV_HEADER,
};
use superadam::mirror_step::{mirror_step, optimality_residual, subproblem_objective};
use superadam::oracle::{CountingOracle, StochasticOracle};
use superadam::problems::{FiniteSumQuadratic, ProblemSpec};
use superadam::rng::SeededRng;
use superadam::superadam::{run, LemmaChecks, SuperAdam, SuperAdamConfig};
use superadam::vector::ParamVector;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("{what} took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64())
    })
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn random_vec(rng: &mut SeededRng, d: usize, scale: f64) -> ParamVector {
    ParamVector::new((0..d).map(|_| scale * rng.standard_normal()).collect()).unwrap()
}

fn tau_name(tau: Tau) -> &'static str {
    match tau {
        Tau::VarianceReduced => "tau=1",
        Tau::Momentum => "tau=0",
    }
}

/// `d = 10`, `n = 50` diagonal quadratic on `[-2, 2]^10` with known `L`, `σ`, `f*`.
fn benchmark_quadratic_spec() -> ProblemSpec {
    ProblemSpec::RandomQuadratic {
        dim: 10,
        components: 50,
        data_seed: 2024,
        curvature_min: 0.5,
        curvature_max: 2.0,
        linear_scale: 1.0,
        domain: FeasibleSet::cube(10, 2.0).unwrap(),
        x0: None,
    }
}

/// Parameters inside the variance-reduced theorem's region: `ν = 5`, `c = 18`.
fn vr_rate_params(smoothness: f64, lambda: f64) -> SuperAdamParams {
    let (k, m) = (1.0, 100.0);
    let gamma = lambda * f64::cbrt(m) / (5.0 * k * smoothness);
    SuperAdamParams {
        schedule: Schedule::with_cap(Tau::VarianceReduced, k, m, 18.0, gamma, 1.0).unwrap(),
        matrix: MatrixConfig::new(MatrixCase::Case1 { beta: 0.999 }, lambda),
        feasible_set: None,
        output_mode: Default::default(),
        reuse_estimator_sample: false,
    }
}

/// Parameters inside the momentum theorem's region: `ν = 10`, `c = 9`.
fn momentum_rate_params(smoothness: f64, lambda: f64) -> SuperAdamParams {
    let (k, m) = (1.0, 100.0_f64);
    let gamma = lambda * m.sqrt() / (10.0 * k * smoothness);
    SuperAdamParams {
        schedule: Schedule::with_cap(Tau::Momentum, k, m, 9.0, gamma, 1.0).unwrap(),
        matrix: MatrixConfig::new(MatrixCase::Case1 { beta: 0.999 }, lambda),
        feasible_set: None,
        output_mode: Default::default(),
        reuse_estimator_sample: false,
    }
}

fn all_cases() -> [MatrixCase; 5] {
    MatrixCase::all_default()
}

/// C1: `λ_min(H_t) ≥ λ` over random gradient streams; case 3 stays below `L + λ`
/// on quadratics.
fn c1_psd_floor() -> Outcome {
    let start = Instant::now();
    let d = 16;
    let streams = 10_000u64;
    let steps = 8;
    let lambda = 1e-3;
    let scales = [1e-8, 1e-3, 1.0, 1e3, 1e8];
    let floors: Vec<Result<f64, String>> = all_cases()
        .par_iter()
        .map(|&case| {
            let mut rng = SeededRng::substream(101, case.name().len() as u64);
            let mut worst = f64::INFINITY;
            for s in 0..streams {
                let mut gen = MatrixGenerator::new(MatrixConfig::new(case, lambda), d).map_err(e)?;
                let scale = scales[(s % scales.len() as u64) as usize];
                let mut prev: Option<(ParamVector, ParamVector)> = None;
                for _ in 0..steps {
                    let x = random_vec(&mut rng, d, 1.0);
                    let g = random_vec(&mut rng, d, scale);
                    let h = gen.generate(&x, &g, prev.as_ref().map(|(a, b)| (a, b))).map_err(e)?;
                    let floor = h.smallest_eigenvalue();
                    if floor < lambda {
                        return Err(format!("{}: λ_min = {floor:e} < λ", case.name()));
                    }
                    worst = worst.min(floor);
                    prev = Some((x, g));
                }
            }
            Ok(worst)
        })
        .collect();
    for f in &floors {
        f.as_ref().map_err(Clone::clone)?;
    }

    // Case 3 on random quadratics: both gradients use the same sample.
    let mut rng = SeededRng::new(102);
    let mut worst_ratio = 0.0f64;
    for q in 0..200 {
        let p = FiniteSumQuadratic::random(d, 5, 1000 + q, 0.0, 3.0, 1.0, FeasibleSet::Unconstrained, None).map_err(e)?;
        let l = p.metadata().smoothness.unwrap();
        let mut gen = MatrixGenerator::new(MatrixConfig::new(MatrixCase::Case3, lambda), d).map_err(e)?;
        let mut x_prev = random_vec(&mut rng, d, 2.0);
        for _ in 0..50 {
            let x = random_vec(&mut rng, d, 2.0);
            let xi = p.sample(&mut rng);
            let h = gen
                .generate(&x, &p.stoch_grad(&x, xi), Some((&x_prev, &p.stoch_grad(&x_prev, xi))))
                .map_err(e)?;
            let AdaptiveMatrix::Scalar { value, .. } = h else {
                return Err("case 3 produced a non-scalar matrix".into());
            };
            ensure(value >= lambda, || format!("case 3 scalar {value} < λ"))?;
            ensure(value <= (l + lambda) * (1.0 + 1e-12), || format!("case 3 scalar {value} > L + λ = {}", l + lambda))?;
            worst_ratio = worst_ratio.max(value / (l + lambda));
            x_prev = x;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10), "C1")?;
    let min_floor = floors.iter().map(|f| *f.as_ref().unwrap()).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "5 cases x {streams} streams x {steps} steps, min λ_min = {min_floor:e} (λ = {lambda:e}); case 3 max H/(L+λ) = {worst_ratio:.6}; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

/// C2: with one component the variance-reduced estimator tracks the gradient exactly.
fn c2_zero_noise() -> Outcome {
    let d = 6;
    let mut worst = 0.0f64;
    for (i, set) in [FeasibleSet::Unconstrained, FeasibleSet::cube(d, 1.5).unwrap()].into_iter().enumerate() {
        let p = FiniteSumQuadratic::random(d, 1, 7 + i as u64, 0.2, 2.0, 1.0, set, None).map_err(e)?;
        for case in all_cases() {
            let schedule = Schedule::new(Tau::VarianceReduced, 1.0, 100.0, 20.0, 0.05).map_err(e)?;
            let cfg = SuperAdamConfig::new(schedule, MatrixConfig::new(case, 0.1), 1000, 3);
            let traj = run(&p, &cfg).map_err(e)?;
            ensure(traj.records.len() == 1000, || "missing records".into())?;
            let m = traj.records.iter().map(|r| r.est_err).fold(0.0, f64::max);
            ensure(m <= 1e-12, || format!("{}: max ‖g_t - ∇f(x_t)‖ = {m:e}", case.name()))?;
            worst = worst.max(m);
        }
    }
    Ok(format!("T = 1000, 5 cases x 2 sets, max ‖g_t - ∇f(x_t)‖ = {worst:e}"))
}

/// C3: the one-step descent inequality holds at every step on a deterministic quadratic.
fn c3_descent_inequality() -> Outcome {
    let d = 10;
    let p = FiniteSumQuadratic::random(d, 1, 33, 0.5, 2.0, 1.0, FeasibleSet::cube(d, 2.0).unwrap(), None).map_err(e)?;
    let l = p.metadata().smoothness.unwrap();
    let (k, m, lambda, t) = (1.0, 100.0, 0.05, 10_000u64);
    let jobs: Vec<(Tau, MatrixCase)> = [Tau::VarianceReduced, Tau::Momentum]
        .into_iter()
        .flat_map(|tau| all_cases().into_iter().map(move |c| (tau, c)))
        .collect();
    let results: Vec<Result<(String, f64), String>> = jobs
        .par_iter()
        .map(|&(tau, case)| {
            let mu0 = match tau {
                Tau::VarianceReduced => k / f64::cbrt(m),
                Tau::Momentum => k / m.sqrt(),
            };
            let gamma = lambda / (4.0 * l * mu0);
            let schedule = Schedule::new(tau, k, m, 20.0_f64.min(m.sqrt()), gamma).map_err(e)?;
            let mut cfg = SuperAdamConfig::new(schedule, MatrixConfig::new(case, lambda), t, 5);
            cfg.lemma_checks = LemmaChecks::DeterministicOnly;
            let traj = run(&p, &cfg).map_err(e)?;
            let lm = &traj.lemmas;
            let label = format!("{} {}", tau_name(tau), case.name());
            ensure(lm.b1_checked == t && lm.b1_applicable == t, || {
                format!("{label}: checked {} applicable {} of {t}", lm.b1_checked, lm.b1_applicable)
            })?;
            let min = lm.b1_min_applicable_slack.unwrap_or(f64::NAN);
            ensure(min >= -1e-9, || format!("{label}: min slack {min:e}"))?;
            let row_min = traj.records.iter().filter_map(|r| r.b1_slack).fold(f64::INFINITY, f64::min);
            ensure(row_min >= -1e-9, || format!("{label}: recorded slack {row_min:e}"))?;
            Ok((label, min))
        })
        .collect();
    let mut worst = f64::INFINITY;
    for r in results {
        let (_, min) = r?;
        worst = worst.min(min);
    }
    Ok(format!("T = {t}, 2 estimators x 5 cases, min slack = {worst:e}"))
}

/// C4: resampled estimator error at frozen states stays below the one-step bound.
fn c4_estimator_recursion() -> Outcome {
    let start = Instant::now();
    let p = FiniteSumQuadratic::random(5, 10, 44, 0.2, 3.0, 1.0, FeasibleSet::cube(5, 3.0).unwrap(), None).map_err(e)?;
    let meta = p.metadata();
    let (l, sigma) = (meta.smoothness.unwrap(), meta.noise_sigma.unwrap());
    let states_per_tau = 50;
    let n = 10_000;
    let mut summary = Vec::new();
    for tau in [Tau::VarianceReduced, Tau::Momentum] {
        let c = match tau {
            Tau::VarianceReduced => 20.0,
            Tau::Momentum => 5.0,
        };
        let schedule = Schedule::new(tau, 1.0, 100.0, c, 0.05).map_err(e)?;
        let cfg = SuperAdamConfig::new(schedule, MatrixConfig::new(MatrixCase::Case2 { beta: 0.99 }, 0.1), 500, 8);
        let mut stepper = SuperAdam::new(&p, &cfg).map_err(e)?;
        let mut states = Vec::new();
        for t in 1..=500u64 {
            let info = stepper.step().map_err(e)?;
            if t % 10 == 1 {
                states.push(FrozenState {
                    x: info.x,
                    x_tilde: info.x_tilde,
                    g: info.g,
                    mu: info.mu,
                    alpha: info.alpha,
                });
            }
        }
        ensure(states.len() == states_per_tau, || "wrong number of states".into())?;
        let checks: Vec<Result<_, String>> = states
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = SeededRng::substream(4040 + i as u64, tau.as_u8() as u64);
                monte_carlo_estimator_check(&p, tau, s, n, &mut rng).map_err(e)
            })
            .collect();
        let mut min_slack = f64::INFINITY;
        for (i, ch) in checks.into_iter().enumerate() {
            let ch = ch?;
            // The bound is also recomputed here from the frozen state.
            let est = p.full_grad(&states[i].x).distance(&states[i].g);
            let step = states[i].x_tilde.distance(&states[i].x);
            let b = estimator_error_bound(tau, states[i].alpha, states[i].mu, est, step, l, sigma);
            ensure((b - ch.bound).abs() <= 1e-12 * b.max(1.0), || "bound mismatch".into())?;
            ensure(ch.passed(), || {
                format!(
                    "{} state {i}: mean {:e} > bound {:e} + 3se {:e}",
                    tau_name(tau),
                    ch.mean,
                    ch.bound,
                    ch.std_err
                )
            })?;
            min_slack = min_slack.min((ch.bound + 3.0 * ch.std_err - ch.mean) / ch.bound.max(1e-300));
        }
        summary.push(format!("{}: min relative slack {min_slack:.3}", tau_name(tau)));
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(120), "C4")?;
    Ok(format!(
        "{states_per_tau} states x {n} resamples per estimator; {}; {:.1}s",
        summary.join(", "),
        elapsed.as_secs_f64()
    ))
}

/// Brute-force minimum of the subproblem over the lattice `h·Z^d` inside `set`.
fn grid_minimum(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    set: &FeasibleSet,
    step: f64,
) -> Option<f64> {
    let (lo, hi) = set.bounding_box()?;
    let d = lo.len();
    let counts: Vec<usize> = lo.iter().zip(&hi).map(|(l, u)| ((u - l) / step).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut best = f64::INFINITY;
    let mut z = vec![0.0; d];
    for idx in 0..total {
        let mut r = idx;
        for j in 0..d {
            z[j] = lo[j] + (r % counts[j]) as f64 * step;
            r /= counts[j];
        }
        let zv = ParamVector::new(z.clone()).unwrap();
        if set.contains(&zv, 0.0) {
            best = best.min(subproblem_objective(x, g, h, gamma, &zv));
        }
    }
    best.is_finite().then_some(best)
}

/// C5: the mirror step is at least as good as a fine grid search and satisfies
/// first-order optimality.
fn c5_mirror_step_oracle() -> Outcome {
    let start = Instant::now();
    let grid = 1e-3;
    let mut rng = SeededRng::new(505);
    struct Instance {
        x: ParamVector,
        g: ParamVector,
        h: AdaptiveMatrix,
        gamma: f64,
        set: FeasibleSet,
        closed_form: bool,
    }
    let mut instances = Vec::new();
    for i in 0..200 {
        let d = 1 + i % 3;
        // Extents keep the lattice near 10^6 points.
        let half = match d {
            1 => rng.uniform(0.5, 2.0),
            2 => rng.uniform(0.1, 0.5),
            _ => rng.uniform(0.02, 0.05),
        };
        let center: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let diag = i % 2 == 0;
        let h = if diag {
            AdaptiveMatrix::Diagonal((0..d).map(|_| rng.uniform(0.1, 10.0)).collect())
        } else {
            AdaptiveMatrix::scalar(rng.uniform(0.1, 10.0), d)
        };
        let ball = (i / 2) % 2 == 0;
        let set = if ball {
            FeasibleSet::ball(center.clone(), half).unwrap()
        } else {
            FeasibleSet::boxed(center.iter().map(|c| c - half).collect(), center.iter().map(|c| c + half).collect()).unwrap()
        };
        let raw = ParamVector::new(center.iter().map(|c| c + half * rng.uniform(-1.2, 1.2)).collect()).unwrap();
        let x = euclidean_project(&raw, &set).unwrap();
        let gamma = rng.uniform(0.01, 1.0);
        let g_scale = rng.uniform(0.01, 5.0) * half / gamma;
        let g = random_vec(&mut rng, d, g_scale);
        instances.push(Instance {
            x,
            g,
            h,
            gamma,
            set,
            closed_form: !(ball && diag),
        });
    }
    let results: Vec<Result<(f64, f64, bool), String>> = instances
        .par_iter()
        .map(|inst| {
            let r = mirror_step(&inst.x, &inst.g, &inst.h, inst.gamma, &inst.set).map_err(e)?;
            ensure(inst.set.contains(&r.x_tilde, 1e-12), || "mirror step left the set".into())?;
            let obj = subproblem_objective(&inst.x, &inst.g, &inst.h, inst.gamma, &r.x_tilde);
            let gmin = grid_minimum(&inst.x, &inst.g, &inst.h, inst.gamma, &inst.set, grid).ok_or("empty grid")?;
            // Never worse than any lattice point...
            ensure(obj <= gmin + 1e-12 * (1.0 + gmin.abs()), || format!("objective {obj} above grid minimum {gmin}"))?;
            // ...and within the lattice resolution of the best one.
            let d = inst.x.dim() as f64;
            // Some feasible lattice point lies within `δ = 2h√d` of the step, so
            // the gap is at most `‖∇q(x̃)‖δ + ‖H‖δ²/(2γ)`.
            let delta = 2.0 * grid * d.sqrt();
            let slope = inst.g.add(&inst.h.apply(&r.x_tilde.sub(&inst.x)).scale(1.0 / inst.gamma)).norm();
            let tol = slope * delta + inst.h.spectral_norm() * delta * delta / (2.0 * inst.gamma);
            ensure(gmin - obj <= tol, || format!("grid minimum {gmin} more than {tol:e} above objective {obj}"))?;
            let res = optimality_residual(&inst.x, &inst.g, &inst.h, inst.gamma, &inst.set, &r.x_tilde).map_err(e)?;
            let scale = 1.0 + r.x_tilde.norm();
            Ok(((gmin - obj) / tol.max(f64::MIN_POSITIVE), res / scale, inst.closed_form))
        })
        .collect();
    let mut worst_closed = 0.0f64;
    let mut worst_bisect = 0.0f64;
    let mut max_gap = 0.0f64;
    for r in results {
        let (gap, res, closed) = r?;
        max_gap = max_gap.max(gap);
        if closed {
            worst_closed = worst_closed.max(res);
        } else {
            worst_bisect = worst_bisect.max(res);
        }
    }
    ensure(worst_closed <= 1e-8, || format!("closed-form residual {worst_closed:e}"))?;
    Ok(format!(
        "200 instances, d ≤ 3, grid 1e-3: max gap / resolution bound {max_gap:.3}; residual closed-form {worst_closed:e}, bisection {worst_bisect:e}; {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn all_optimizers(smoothness_hint: f64) -> Vec<OptimizerSpec> {
    let mut out = Vec::new();
    for tau in [Tau::VarianceReduced, Tau::Momentum] {
        for case in all_cases() {
            let c = if tau == Tau::VarianceReduced { 20.0 } else { 10.0 };
            let schedule = Schedule::new(tau, 1.0, 100.0, c, 0.02 / smoothness_hint).unwrap();
            let p = SuperAdamParams {
                schedule,
                matrix: MatrixConfig::new(case, 0.05),
                feasible_set: None,
                output_mode: Default::default(),
                reuse_estimator_sample: false,
            };
            out.push(OptimizerSpec::superadam(format!("sa_tau{}_{}", tau.as_u8(), case.name()), p));
        }
    }
    let baselines = [
        BaselineConfig::Adagrad { eta: 0.05, decreasing: true, running_sum: false },
        BaselineConfig::Adam { eta: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8, decreasing: true, bias_correction: true },
        BaselineConfig::Amsgrad { eta: 0.01, beta1: 0.9, beta2: 0.999, decreasing: true },
        BaselineConfig::Adamw { eta: 0.005, beta1: 0.9, beta2: 0.999, eps: 1e-8, alpha: 1.0, weight_decay: 1e-3, decreasing: false },
        BaselineConfig::Adabelief { eta: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8, decreasing: true },
        BaselineConfig::AdagradNorm { eta: 0.2, b0: 1.0 },
        BaselineConfig::AdaptiveSgd { k: 0.2, omega: 1.0, eps: 0.01 },
        BaselineConfig::Storm { k: 0.1, omega: 10.0, c: 10.0 },
    ];
    for b in baselines {
        out.push(OptimizerSpec::baseline(b.name(), b));
    }
    out
}

fn read_records(path: &Path) -> Result<Vec<RunRecord>, String> {
    let text = std::fs::read_to_string(path).map_err(e)?;
    let mut lines = text.lines();
    ensure(lines.next() == Some(CSV_HEADER), || format!("{}: bad header", path.display()))?;
    lines.map(|l| RunRecord::parse_csv_row(l).map_err(e)).collect()
}

/// C6: `‖G_X‖ ≤ M_t` on every recorded row of every optimizer x problem cell.
fn c6_measure_chain() -> Outcome {
    let problems = vec![
        ("quadratic", benchmark_quadratic_spec(), 2.0),
        (
            "logistic",
            ProblemSpec::NoisyLogistic {
                dim: 8,
                components: 200,
                data_seed: 6,
                feature_scale: 1.0,
                label_noise: 0.1,
                nonconvex: false,
                domain: FeasibleSet::ball(vec![0.0; 8], 5.0).unwrap(),
                x0: None,
            },
            4.0,
        ),
        (
            "sigmoid_squared",
            ProblemSpec::NoisyLogistic {
                dim: 8,
                components: 200,
                data_seed: 7,
                feature_scale: 1.0,
                label_noise: 0.1,
                nonconvex: true,
                domain: FeasibleSet::Unconstrained,
                x0: None,
            },
            2.0,
        ),
        (
            "rosenbrock",
            ProblemSpec::StochasticRosenbrock {
                dim: 4,
                noise_sigma: 0.1,
                domain: FeasibleSet::cube(4, 1.5).unwrap(),
                x0: None,
            },
            4000.0,
        ),
    ];
    let dir = tempfile::tempdir().map_err(e)?;
    let mut rows = 0usize;
    let mut cells = 0usize;
    for (name, spec, lhint) in problems {
        let cfg = ExperimentConfig {
            name: name.into(),
            problem: spec,
            optimizers: all_optimizers(lhint),
            iterations: 2000,
            seeds: vec![1, 2, 3],
            record_every: 1,
            measure_every_step: true,
            lemma_checks: LemmaChecks::Off,
            checkpoints: vec![],
            output: None,
            workers: None,
        };
        let out = dir.path().join(name);
        let outcome = run_experiment(&cfg, &RunOptions { out_dir: Some(out.clone()), workers: None }).map_err(e)?;
        for o in &outcome.summary.optimizers {
            ensure(o.aggregate.seeds_aborted == 0, || format!("{name}/{}: aborted", o.label))?;
            ensure(o.aggregate.chain_violations == 0, || {
                format!("{name}/{}: {} chain violations", o.label, o.aggregate.chain_violations)
            })?;
            for c in &o.cells {
                let recs = read_records(&out.join(&c.csv))?;
                ensure(recs.len() == 2000, || format!("{}: {} rows", c.csv, recs.len()))?;
                for r in &recs {
                    ensure(r.gradmap_norm <= r.mt * (1.0 + 1e-12), || {
                        format!("{name}/{} t={}: ‖G‖ {} > M_t {}", o.label, r.t, r.gradmap_norm, r.mt)
                    })?;
                }
                rows += recs.len();
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells (18 optimizers x 4 problems x 3 seeds), {rows} rows, 0 violations"))
}

fn theory_experiment(name: &str, iterations: u64, seeds: u64, checkpoints: Vec<u64>, record_every: u64) -> Result<ExperimentConfig, String> {
    let spec = benchmark_quadratic_spec();
    let oracle = superadam::problems::make_problem(&spec).map_err(e)?;
    let l = oracle.metadata().smoothness.ok_or("L unknown")?;
    let lambda = 0.0005;
    Ok(ExperimentConfig {
        name: name.into(),
        problem: spec,
        optimizers: vec![
            OptimizerSpec::superadam("tau1", vr_rate_params(l, lambda)),
            OptimizerSpec::superadam("tau0", momentum_rate_params(l, lambda)),
        ],
        iterations,
        seeds: (1..=seeds).collect(),
        record_every,
        measure_every_step: true,
        lemma_checks: LemmaChecks::Off,
        checkpoints,
        output: None,
        workers: None,
    })
}

fn run_in_temp(cfg: &ExperimentConfig) -> Result<(ExperimentSummary, tempfile::TempDir), String> {
    let dir = tempfile::tempdir().map_err(e)?;
    let outcome = run_experiment(cfg, &RunOptions { out_dir: Some(dir.path().to_path_buf()), workers: None }).map_err(e)?;
    Ok((outcome.summary, dir))
}

/// C7: seed-averaged `(1/T)Σ M_t` lies below the worst-case bounds.
fn c7_theorem_envelopes() -> Outcome {
    let start = Instant::now();
    let cfg = theory_experiment("envelopes", 100_000, 20, vec![100, 1_000, 10_000, 100_000], 10_000)?;
    let (summary, _dir) = run_in_temp(&cfg)?;
    let mut parts = Vec::new();
    for o in &summary.optimizers {
        let th = o.aggregate.theory.as_ref().ok_or("no theory comparison")?;
        let cs = th.constants.ok_or("constants unknown")?;
        let conds = match o.label.as_str() {
            "tau1" => vr_rate_conditions(&cs),
            _ => momentum_rate_conditions(&cs),
        };
        ensure(conds.is_empty() && th.conditions_violated.is_empty(), || format!("{}: {conds:?}", o.label))?;
        ensure(o.aggregate.seeds_ok == 20, || format!("{}: {} seeds ok", o.label, o.aggregate.seeds_ok))?;
        let ts: Vec<u64> = th.points.iter().map(|p| p.t).collect();
        ensure(ts == [100, 1_000, 10_000, 100_000], || format!("{}: horizons {ts:?}", o.label))?;
        for p in &th.points {
            ensure(p.avg_mt <= p.bound, || format!("{} T={}: avg M_t {:e} > bound {:e}", o.label, p.t, p.avg_mt, p.bound))?;
        }
        let ratio = th.points.iter().map(|p| p.avg_mt / p.bound).fold(0.0, f64::max);
        parts.push(format!("{} ({}) max avg/bound = {ratio:.2e}", o.label, th.bound));
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(600), "C7")?;
    Ok(format!("R = 20, T in 1e2..1e5: {}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

/// C8: empirical rate exponents of the averaged measure.
fn c8_rate_exponents() -> Outcome {
    let start = Instant::now();
    let horizons: Vec<u64> = (0..=6).map(|i| (1e3 * 10f64.powf(i as f64 / 2.0)).round() as u64).collect();
    let cfg = theory_experiment("rates", 1_000_000, 20, horizons.clone(), 100_000)?;
    let (summary, _dir) = run_in_temp(&cfg)?;
    let slope = |label: &str| -> Result<f64, String> {
        let o = summary.optimizers.iter().find(|o| o.label == label).ok_or("missing optimizer")?;
        let ts: Vec<u64> = o.aggregate.series.iter().map(|p| p.0).collect();
        ensure(ts == horizons, || format!("{label}: horizons {ts:?}"))?;
        o.aggregate.slope.ok_or_else(|| o.aggregate.slope_note.clone().unwrap_or_default())
    };
    let s1 = slope("tau1")?;
    let s0 = slope("tau0")?;
    ensure(s1 <= -0.28, || format!("tau=1 slope {s1:.4} > -0.28"))?;
    ensure(s0 <= -0.20, || format!("tau=0 slope {s0:.4} > -0.20"))?;
    ensure(s1 < s0, || format!("tau=1 slope {s1:.4} not below tau=0 slope {s0:.4}"))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1800), "C8")?;
    Ok(format!(
        "R = 20, T in 1e3..1e6: slope tau=1 {s1:.4}, tau=0 {s0:.4}; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

/// C9: the variance-reduced estimator fed STORM's `α = cη²` reproduces STORM's
/// estimates bit for bit.
fn c9_storm_equivalence() -> Outcome {
    let p = FiniteSumQuadratic::random(6, 20, 99, 0.2, 2.0, 1.0, FeasibleSet::Unconstrained, None).map_err(e)?;
    let (k, omega, c) = (0.1, 10.0, 50.0);
    let steps = 1000;
    let mut rng = SeededRng::new(909);
    let mut x = p.initial_point();
    let xi = p.sample(&mut rng);
    let g1 = p.stoch_grad(&x, xi);
    let mut storm = Storm::new(k, omega, c, g1.clone());
    let mut est = EstimatorState::new(g1.clone());
    let mut sample_grad = g1;
    let mut path = vec![x.clone()];
    for t in 0..steps {
        let eta = storm.advance_rate(&sample_grad);
        let x_next = storm.step_point(&x, eta).map_err(e)?;
        let xi = p.sample(&mut rng);
        let gn = p.stoch_grad(&x_next, xi);
        let go = p.stoch_grad(&x, xi);
        storm.update_estimate(eta, &gn, &go).map_err(e)?;
        est.update_with_alpha(Tau::VarianceReduced, c * eta * eta, &gn, Some(&go)).map_err(e)?;
        let same = storm.g.iter().zip(est.estimate().iter()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || format!("estimates differ at step {}", t + 1))?;
        sample_grad = gn;
        x = x_next;
        path.push(x.clone());
    }
    // The hand-driven loop is the packaged baseline: same stream, same iterates.
    let cfg = BaselineRunConfig::new(BaselineConfig::Storm { k, omega, c }, steps, 0);
    let mut bcfg = cfg.clone();
    bcfg.seed = 0;
    let traj = run_baseline(&p, &bcfg).map_err(e)?;
    let mut rng0 = SeededRng::substream(0, superadam::rng::stream::ESTIMATOR);
    let mut x = p.initial_point();
    let xi = p.sample(&mut rng0);
    let g1 = p.stoch_grad(&x, xi);
    let mut storm = Storm::new(k, omega, c, g1.clone());
    let mut est = EstimatorState::new(g1.clone());
    let mut sample_grad = g1;
    let iterates = traj.iterates.as_ref().ok_or("iterates not stored")?;
    for (t, stored) in iterates.iter().enumerate() {
        ensure(stored.iter().zip(x.iter()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("baseline iterate differs at t={}", t + 1)
        })?;
        let eta = storm.advance_rate(&sample_grad);
        let x_next = storm.step_point(&x, eta).map_err(e)?;
        let xi = p.sample(&mut rng0);
        let gn = p.stoch_grad(&x_next, xi);
        let go = p.stoch_grad(&x, xi);
        storm.update_estimate(eta, &gn, &go).map_err(e)?;
        est.update_with_alpha(Tau::VarianceReduced, c * eta * eta, &gn, Some(&go)).map_err(e)?;
        ensure(storm.g.iter().zip(est.estimate().iter()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("estimates differ against the packaged run at t={}", t + 1)
        })?;
        sample_grad = gn;
        x = x_next;
    }
    Ok(format!("{steps} steps bit-identical; packaged STORM run reproduces the same {} iterates", iterates.len()))
}

/// C10: counting wrapper totals match `T + 1` and `2T + 1` estimator calls.
fn c10_call_accounting() -> Outcome {
    let p = FiniteSumQuadratic::random(4, 12, 10, 0.2, 2.0, 1.0, FeasibleSet::cube(4, 2.0).unwrap(), None).map_err(e)?;
    let counted = CountingOracle::new(&p);
    let t = 777u64;
    let mut checked = 0;
    for tau in [Tau::Momentum, Tau::VarianceReduced] {
        let expected = match tau {
            Tau::Momentum => t + 1,
            Tau::VarianceReduced => 2 * t + 1,
        };
        for case in all_cases() {
            for reuse in [false, true] {
                counted.reset();
                let mut cfg = SuperAdamConfig::new(
                    Schedule::new(tau, 1.0, 100.0, 5.0, 0.01).map_err(e)?,
                    MatrixConfig::new(case, 0.1),
                    t,
                    4,
                );
                cfg.reuse_estimator_sample = reuse;
                let traj = run(&counted as &dyn StochasticOracle, &cfg).map_err(e)?;
                let label = format!("{} {} reuse={reuse}", tau_name(tau), case.name());
                ensure(traj.calls.estimator == expected, || {
                    format!("{label}: estimator calls {} != {expected}", traj.calls.estimator)
                })?;
                ensure(counted.stoch_grad_calls() == traj.calls.total(), || {
                    format!("{label}: wrapper {} != reported {}", counted.stoch_grad_calls(), traj.calls.total())
                })?;
                // Sharing samples with the estimator leaves only estimator calls,
                // except case 3 under momentum, which needs one extra gradient.
                if reuse && !(case == MatrixCase::Case3 && tau == Tau::Momentum) {
                    ensure(counted.stoch_grad_calls() == expected, || {
                        format!("{label}: wrapper {} != {expected}", counted.stoch_grad_calls())
                    })?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("T = {t}, {checked} configurations: tau=0 {} calls, tau=1 {} calls", t + 1, 2 * t + 1))
}

fn dir_contents(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(e)? {
        let entry = entry.map_err(e)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        out.insert(name, std::fs::read(entry.path()).map_err(e)?);
    }
    Ok(out)
}

/// C11: identical config and seeds give byte-identical output, regardless of
/// how many workers run the cells.
fn c11_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        name: "determinism".into(),
        problem: benchmark_quadratic_spec(),
        optimizers: all_optimizers(2.0),
        iterations: 1500,
        seeds: vec![3, 1, 4],
        record_every: 7,
        measure_every_step: true,
        lemma_checks: LemmaChecks::MonteCarlo { n_resamples: 20 },
        checkpoints: vec![10, 100, 1000],
        output: None,
        workers: None,
    };
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, workers) in dirs.iter().zip([1usize, 4, 1]) {
        let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), workers: Some(workers) };
        run_experiment(&cfg, &opts).map_err(e)?;
    }
    let a = dir_contents(dirs[0].path())?;
    let csvs = a.keys().filter(|k| k.ends_with(".csv")).count();
    ensure(csvs == cfg.optimizers.len() * cfg.seeds.len(), || format!("{csvs} CSV files"))?;
    for (i, d) in dirs.iter().enumerate().skip(1) {
        let b = dir_contents(d.path())?;
        ensure(a.keys().eq(b.keys()), || "different file sets".into())?;
        for (name, bytes) in &a {
            ensure(b[name] == *bytes, || format!("run {i}: {name} differs"))?;
        }
    }
    let bytes: usize = a.values().map(|v| v.len()).sum();
    Ok(format!("{} files ({csvs} CSVs), {bytes} bytes identical across 3 runs (1 and 4 workers)", a.len()))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("C1", "PSD floor", c1_psd_floor),
        ("C2", "zero-noise exactness", c2_zero_noise),
        ("C3", "descent inequality per step", c3_descent_inequality),
        ("C4", "estimator-error recursion", c4_estimator_recursion),
        ("C5", "mirror-step oracle equivalence", c5_mirror_step_oracle),
        ("C6", "measure chain", c6_measure_chain),
        ("C7", "theorem bounds as envelopes", c7_theorem_envelopes),
        ("C8", "rate exponents", c8_rate_exponents),
        ("C9", "STORM equivalence", c9_storm_equivalence),
        ("C10", "oracle-call accounting", c10_call_accounting),
        ("C11", "determinism", c11_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == id) {
            continue;
        }
        ran += 1;
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name}: {why}");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
