//! Per-step descent and estimator-error inequalities.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::estimator::Tau;
use crate::oracle::StochasticOracle;
use crate::rng::SeededRng;
use crate::vector::ParamVector;

/// Slack of the one-step descent inequality
/// `f(x_{t+1}) ≤ f(x_t) + (μγ/ρ)‖∇f(x_t) - g_t‖² - (ρμ/2γ)‖x̃_{t+1} - x_t‖²`.
/// Nonnegative whenever the inequality holds; it is guaranteed when
/// `0 < μ ≤ 1` and `γ ≤ ρ/(2Lμ)`.
pub fn b1_slack(
    f_t: f64,
    f_next: f64,
    est_err: f64,
    step_norm: f64,
    mu: f64,
    gamma: f64,
    rho: f64,
) -> f64 {
    f_t + mu * gamma / rho * est_err * est_err - rho * mu / (2.0 * gamma) * step_norm * step_norm - f_next
}

/// Right-hand side of the one-step estimator-error recursion, conditional on
/// the current state:
/// `τ = 1`: `(1-α)²e² + 2(1-α)²L²μ²s² + 2α²σ²`;
/// `τ = 0`: `(1-α)e² + L²μ²s²/α + α²σ²`,
/// where `e = ‖∇f(x_t) - g_t‖` and `s = ‖x̃_{t+1} - x_t‖`.
pub fn estimator_error_bound(
    tau: Tau,
    alpha: f64,
    mu: f64,
    est_err: f64,
    step_norm: f64,
    smoothness: f64,
    sigma: f64,
) -> f64 {
    let keep = 1.0 - alpha;
    let drift = smoothness * smoothness * mu * mu * step_norm * step_norm;
    let e2 = est_err * est_err;
    let s2 = sigma * sigma;
    match tau {
        Tau::VarianceReduced => keep * keep * e2 + 2.0 * keep * keep * drift + 2.0 * alpha * alpha * s2,
        Tau::Momentum => keep * e2 + drift / alpha + alpha * alpha * s2,
    }
}

/// A snapshot of one iteration, enough to resample the next estimator value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenState {
    pub x: ParamVector,
    pub x_tilde: ParamVector,
    pub g: ParamVector,
    pub mu: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCheck {
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
    /// `bound + 3·std_err - mean`; nonnegative means the check passed.
    pub slack: f64,
}

impl MonteCarloCheck {
    pub fn passed(&self) -> bool {
        self.slack >= 0.0
    }
}

/// Resamples `ξ_{t+1}` `n` times at a frozen state and compares the empirical
/// mean of `‖∇f(x_{t+1}) - g_{t+1}‖²` with [`estimator_error_bound`].
pub fn monte_carlo_estimator_check(
    oracle: &dyn StochasticOracle,
    tau: Tau,
    state: &FrozenState,
    n: usize,
    rng: &mut SeededRng,
) -> Result<MonteCarloCheck> {
    if n < 2 {
        return Err(Error::invalid("n_resamples", "need at least 2"));
    }
    if !(state.alpha > 0.0 && state.alpha <= 1.0 && state.mu > 0.0 && state.mu <= 1.0) {
        return Err(Error::Contract("alpha and mu must lie in (0, 1]".into()));
    }
    let meta = oracle.metadata();
    let smoothness = meta.smoothness.ok_or(Error::MissingMetadata("smoothness"))?;
    let sigma = meta.noise_sigma.ok_or(Error::MissingMetadata("noise_sigma"))?;
    let d = oracle.dim();
    check_dim(d, state.x.dim())?;
    check_dim(d, state.x_tilde.dim())?;
    check_dim(d, state.g.dim())?;

    let x_next = state.x.lerp(&state.x_tilde, state.mu);
    let full_next = oracle.full_grad(&x_next);
    let keep = 1.0 - state.alpha;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let xi = oracle.sample(rng);
        let gn = oracle.stoch_grad(&x_next, xi);
        let g_next = match tau {
            Tau::Momentum => state.g.zip_map(&gn, |g, fresh| state.alpha * fresh + keep * g),
            Tau::VarianceReduced => {
                let go = oracle.stoch_grad(&state.x, xi);
                let mut out = gn.clone();
                for ((o, g), old) in out.as_mut_slice().iter_mut().zip(state.g.iter()).zip(go.iter()) {
                    *o += keep * (g - old);
                }
                out
            }
        };
        let err = full_next.distance(&g_next).powi(2);
        sum += err;
        sum_sq += err * err;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let std_err = (var / nf).sqrt();
    let est_err = oracle.full_grad(&state.x).distance(&state.g);
    let bound = estimator_error_bound(
        tau,
        state.alpha,
        state.mu,
        est_err,
        state.x_tilde.distance(&state.x),
        smoothness,
        sigma,
    );
    Ok(MonteCarloCheck {
        mean,
        std_err,
        bound,
        slack: bound + 3.0 * std_err - mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b1_slack_arithmetic() {
        // 1 + 0.5·0.1/0.5·4 - 0.5·0.5/0.2·1 - 0.9
        let s = b1_slack(1.0, 0.9, 2.0, 1.0, 0.5, 0.1, 0.5);
        assert!((s - (1.0 + 0.4 - 1.25 - 0.9)).abs() < 1e-15);
    }

    #[test]
    fn bound_reduces_to_noise_when_alpha_is_one() {
        for tau in [Tau::Momentum, Tau::VarianceReduced] {
            let b = estimator_error_bound(tau, 1.0, 0.3, 5.0, 2.0, 3.0, 0.5);
            let expected = match tau {
                Tau::VarianceReduced => 2.0 * 0.25,
                Tau::Momentum => 3.0f64.powi(2) * 0.09 * 4.0 + 0.25,
            };
            assert!((b - expected).abs() < 1e-14);
        }
    }
}
