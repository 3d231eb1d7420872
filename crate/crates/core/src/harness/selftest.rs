//! Fast in-process invariant checks, run by the `selftest` subcommand.

use crate::adaptive_matrix::{AdaptiveMatrix, MatrixCase, MatrixConfig, MatrixGenerator};
use crate::error::Result;
use crate::estimator::{Schedule, Tau};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::mirror_step::{mirror_step, optimality_residual};
use crate::oracle::{CountingOracle, StochasticOracle};
use crate::problems::FiniteSumQuadratic;
use crate::rng::SeededRng;
use crate::superadam::{run, SuperAdamConfig};
use crate::vector::ParamVector;

use super::runner::records_to_csv;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_vec(rng: &mut SeededRng, d: usize, scale: f64) -> ParamVector {
    ParamVector::new((0..d).map(|_| scale * rng.standard_normal()).collect()).expect("finite")
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn psd_floor() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(11);
    let d = 8;
    let lambda = 0.01;
    let mut worst = f64::INFINITY;
    for case in MatrixCase::all_default() {
        for _ in 0..50 {
            let mut gen = MatrixGenerator::new(MatrixConfig::new(case, lambda), d)?;
            let mut prev: Option<(ParamVector, ParamVector)> = None;
            for _ in 0..20 {
                let x = random_vec(&mut rng, d, 1.0);
                let g = random_vec(&mut rng, d, 10.0);
                let h = gen.generate(&x, &g, prev.as_ref().map(|(a, b)| (a, b)))?;
                worst = worst.min(h.smallest_eigenvalue() - lambda);
                prev = Some((x, g));
            }
        }
    }
    Ok((worst >= 0.0, format!("min(λ_min(H) - λ) = {worst:e}")))
}

fn projection_idempotence() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(12);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let d = 1 + i % 5;
        let set = if i % 2 == 0 {
            FeasibleSet::cube(d, rng.uniform(0.1, 2.0))?
        } else {
            FeasibleSet::ball(random_vec(&mut rng, d, 1.0).as_slice().to_vec(), rng.uniform(0.1, 2.0))?
        };
        let v = random_vec(&mut rng, d, 3.0);
        let p = euclidean_project(&v, &set)?;
        worst = worst.max(euclidean_project(&p, &set)?.distance(&p));
    }
    Ok((worst <= 1e-12, format!("max ‖P(P(v)) - P(v)‖ = {worst:e}")))
}

fn mirror_step_optimality() -> Result<(bool, String)> {
    let mut rng = SeededRng::new(13);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let d = 1 + i % 4;
        let x = random_vec(&mut rng, d, 0.5);
        let g = random_vec(&mut rng, d, 2.0);
        let gamma = rng.uniform(0.01, 1.0);
        let (h, set) = match i % 3 {
            0 => (
                AdaptiveMatrix::Diagonal((0..d).map(|_| rng.uniform(0.1, 5.0)).collect()),
                FeasibleSet::Unconstrained,
            ),
            1 => (
                AdaptiveMatrix::Diagonal((0..d).map(|_| rng.uniform(0.1, 5.0)).collect()),
                FeasibleSet::cube(d, 1.0)?,
            ),
            _ => (AdaptiveMatrix::scalar(rng.uniform(0.1, 5.0), d), FeasibleSet::ball(vec![0.0; d], 1.0)?),
        };
        let x = if set.contains(&x, 0.0) { x } else { euclidean_project(&x, &set)? };
        let r = mirror_step(&x, &g, &h, gamma, &set)?;
        worst = worst.max(optimality_residual(&x, &g, &h, gamma, &set, &r.x_tilde)?);
    }
    Ok((worst <= 1e-8, format!("max optimality residual = {worst:e}")))
}

fn problem() -> Result<FiniteSumQuadratic> {
    FiniteSumQuadratic::random(5, 10, 3, 0.2, 2.0, 1.0, FeasibleSet::cube(5, 4.0)?, None)
}

fn config(tau: Tau, iterations: u64, seed: u64) -> Result<SuperAdamConfig> {
    let schedule = Schedule::new(tau, 1.0, 100.0, 40.0, 0.01)?;
    Ok(SuperAdamConfig::new(
        schedule,
        MatrixConfig::new(MatrixCase::all_default()[0], 0.05),
        iterations,
        seed,
    ))
}

fn zero_noise_exactness() -> Result<(bool, String)> {
    let p = FiniteSumQuadratic::new(vec![vec![1.0, 2.0, 0.5]], vec![vec![0.3, -0.2, 1.0]], FeasibleSet::Unconstrained, None)?;
    let traj = run(&p, &config(Tau::VarianceReduced, 300, 1)?)?;
    let worst = traj.records.iter().map(|r| r.est_err).fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max ‖g_t - ∇f(x_t)‖ = {worst:e}")))
}

fn measure_chain() -> Result<(bool, String)> {
    let p = problem()?;
    let mut violations = 0;
    let mut steps = 0;
    for case in MatrixCase::all_default() {
        for tau in [Tau::Momentum, Tau::VarianceReduced] {
            let mut cfg = config(tau, 300, 2)?;
            cfg.matrix = MatrixConfig::new(case, 0.05);
            let traj = run(&p, &cfg)?;
            violations += traj.chain_violations;
            steps += traj.measured_steps;
        }
    }
    Ok((violations == 0, format!("{violations} violations in {steps} steps")))
}

fn call_accounting() -> Result<(bool, String)> {
    let p = problem()?;
    let counted = CountingOracle::new(&p);
    let t = 250;
    let mut details = Vec::new();
    let mut ok = true;
    for (tau, per) in [(Tau::Momentum, 1), (Tau::VarianceReduced, 2)] {
        counted.reset();
        let traj = run(&counted as &dyn StochasticOracle, &config(tau, t, 3)?)?;
        let expected = per * t + 1;
        ok &= traj.calls.estimator == expected && counted.stoch_grad_calls() == traj.calls.total();
        details.push(format!(
            "tau={}: estimator {} (expected {expected}), oracle {}",
            tau.as_u8(),
            traj.calls.estimator,
            counted.stoch_grad_calls()
        ));
    }
    Ok((ok, details.join("; ")))
}

fn determinism() -> Result<(bool, String)> {
    let p = problem()?;
    let cfg = config(Tau::VarianceReduced, 200, 4)?;
    let a = records_to_csv(&run(&p, &cfg)?.records);
    let b = records_to_csv(&run(&p, &cfg)?.records);
    Ok((a == b, format!("{} bytes compared", a.len())))
}

/// Runs every check; the suite passes when all results pass.
pub fn selftest() -> Vec<CheckResult> {
    vec![
        check("psd_floor", psd_floor),
        check("projection_idempotence", projection_idempotence),
        check("mirror_step_optimality", mirror_step_optimality),
        check("zero_noise_exactness", zero_noise_exactness),
        check("measure_chain", measure_chain),
        check("call_accounting", call_accounting),
        check("determinism", determinism),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for r in super::selftest() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
