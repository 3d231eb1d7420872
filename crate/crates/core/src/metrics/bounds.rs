//! Closed-form convergence bounds and their parameter conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem and schedule constants entering the bounds. `ln` is natural.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    /// `f(x_1)`.
    pub f1: f64,
    pub f_star: f64,
    pub rho: f64,
    pub gamma: f64,
    pub k: f64,
    pub m: f64,
    pub c: f64,
    pub sigma: f64,
    pub smoothness: f64,
}

fn basic_checks(cs: &TheoryConstants, out: &mut Vec<String>) {
    for (name, v) in [
        ("rho", cs.rho),
        ("gamma", cs.gamma),
        ("k", cs.k),
        ("m", cs.m),
        ("c", cs.c),
        ("L", cs.smoothness),
    ] {
        if !(v.is_finite() && v > 0.0) {
            out.push(format!("{name} = {v} must be positive"));
        }
    }
    if !(cs.sigma.is_finite() && cs.sigma >= 0.0) {
        out.push(format!("sigma = {} must be >= 0", cs.sigma));
    }
    if !(cs.f1.is_finite() && cs.f_star.is_finite()) {
        out.push("f(x_1) and f* must be finite".into());
    } else if cs.f1 < cs.f_star {
        out.push(format!("f(x_1) = {} below f* = {}", cs.f1, cs.f_star));
    }
}

fn fail_if_any(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::ConditionViolated(violations))
    }
}

fn c_and_m_conditions_tau1(cs: &TheoryConstants, out: &mut Vec<String>) {
    let (k, m, l) = (cs.k, cs.m, cs.smoothness);
    let c_lo = 1.0 / k.powi(3) + 10.0 * l * l * cs.gamma * cs.gamma / (cs.rho * cs.rho);
    let c_hi = m.powf(2.0 / 3.0) / (k * k);
    if cs.c < c_lo {
        out.push(format!("c = {} below 1/k^3 + 10 L^2 gamma^2 / rho^2 = {c_lo}", cs.c));
    }
    if cs.c > c_hi {
        out.push(format!("c = {} above m^(2/3)/k^2 = {c_hi}", cs.c));
    }
    let m_lo = 1.5f64.max(k.powi(3)).max(8f64.powf(1.5) / (3.0 * k).powf(1.5));
    if m < m_lo {
        out.push(format!("m = {m} below max(3/2, k^3, 8^(3/2)/(3k)^(3/2)) = {m_lo}"));
    }
}

fn c_and_m_conditions_tau0(cs: &TheoryConstants, out: &mut Vec<String>) {
    let (k, m, l) = (cs.k, cs.m, cs.smoothness);
    let c_lo = 8.0 * l * cs.gamma / cs.rho;
    let c_hi = m.sqrt() / k;
    if cs.c < c_lo {
        out.push(format!("c = {} below 8 L gamma / rho = {c_lo}", cs.c));
    }
    if cs.c > c_hi {
        out.push(format!("c = {} above m^(1/2)/k = {c_hi}", cs.c));
    }
    if m < k * k {
        out.push(format!("m = {m} below k^2 = {}", k * k));
    }
}

/// Violated conditions of the variance-reduced (`τ = 1`) rate; empty if all hold.
pub fn vr_rate_conditions(cs: &TheoryConstants) -> Vec<String> {
    let mut out = Vec::new();
    basic_checks(cs, &mut out);
    if !out.is_empty() {
        return out;
    }
    let g_hi = cs.rho * cs.m.cbrt() / (4.0 * cs.k * cs.smoothness);
    if cs.gamma > g_hi {
        out.push(format!("gamma = {} above rho m^(1/3) / (4 k L) = {g_hi}", cs.gamma));
    }
    c_and_m_conditions_tau1(cs, &mut out);
    out
}

/// Violated conditions of the momentum (`τ = 0`) rate; empty if all hold.
pub fn momentum_rate_conditions(cs: &TheoryConstants) -> Vec<String> {
    let mut out = Vec::new();
    basic_checks(cs, &mut out);
    if !out.is_empty() {
        return out;
    }
    let g_hi = cs.rho * cs.m.sqrt() / (8.0 * cs.smoothness * cs.k);
    if cs.gamma > g_hi {
        out.push(format!("gamma = {} above rho m^(1/2) / (8 L k) = {g_hi}", cs.gamma));
    }
    c_and_m_conditions_tau0(cs, &mut out);
    out
}

fn check_horizon(t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    Ok(t as f64)
}

/// `G = (f_1 - f*)/(kργ) + m^{1/3}σ²/(8k²L²γ²) + k²c²σ² ln(m+T)/(4L²γ²)`.
pub fn vr_rate_g(cs: &TheoryConstants, t: u64) -> f64 {
    let TheoryConstants {
        f1,
        f_star,
        rho,
        gamma,
        k,
        m,
        c,
        sigma,
        smoothness: l,
    } = *cs;
    let s2 = sigma * sigma;
    let lg2 = l * l * gamma * gamma;
    (f1 - f_star) / (k * rho * gamma)
        + m.cbrt() * s2 / (8.0 * k * k * lg2)
        + k * k * c * c * s2 * (m + t as f64).ln() / (4.0 * lg2)
}

/// `2√(2G) m^{1/6}/T^{1/2} + 2√(2G)/T^{1/3}`, a bound on `(1/T)Σ E[M_t]`.
pub fn vr_rate_bound(cs: &TheoryConstants, t: u64) -> Result<f64> {
    fail_if_any(vr_rate_conditions(cs))?;
    let tf = check_horizon(t)?;
    let a = 2.0 * (2.0 * vr_rate_g(cs, t)).sqrt();
    Ok(a * cs.m.powf(1.0 / 6.0) / tf.sqrt() + a / tf.cbrt())
}

/// `M = (f_1 - f*)/(ργk) + 2σ²/(ργkL) + 2mσ² ln(m+T)/(ργkL)`.
pub fn momentum_rate_m(cs: &TheoryConstants, t: u64) -> f64 {
    let TheoryConstants {
        f1,
        f_star,
        rho,
        gamma,
        k,
        m,
        sigma,
        smoothness: l,
        ..
    } = *cs;
    let s2 = sigma * sigma;
    let rgk = rho * gamma * k;
    (f1 - f_star) / rgk + 2.0 * s2 / (rgk * l) + 2.0 * m * s2 * (m + t as f64).ln() / (rgk * l)
}

/// `2√(2M) m^{1/4}/T^{1/2} + 2√(2M)/T^{1/4}`, a bound on `(1/T)Σ E[M_t]`.
pub fn momentum_rate_bound(cs: &TheoryConstants, t: u64) -> Result<f64> {
    fail_if_any(momentum_rate_conditions(cs))?;
    let tf = check_horizon(t)?;
    let a = 2.0 * (2.0 * momentum_rate_m(cs, t)).sqrt();
    Ok(a * cs.m.powf(0.25) / tf.sqrt() + a / tf.powf(0.25))
}

/// Step size `γ = ρ m^{1/3}/(ν k L)` of the unconstrained variance-reduced corollary.
pub fn vr_tuned_gamma(rho: f64, m: f64, nu: f64, k: f64, smoothness: f64) -> f64 {
    rho * m.cbrt() / (nu * k * smoothness)
}

/// Step size `γ = ρ m^{1/2}/(ν L k)` of the unconstrained momentum corollary.
pub fn momentum_tuned_gamma(rho: f64, m: f64, nu: f64, k: f64, smoothness: f64) -> f64 {
    rho * m.sqrt() / (nu * smoothness * k)
}

fn gamma_matches(gamma: f64, expected: f64) -> bool {
    (gamma - expected).abs() <= 1e-12 * expected.abs()
}

pub fn vr_tuned_conditions(cs: &TheoryConstants, nu: f64) -> Vec<String> {
    let mut out = Vec::new();
    basic_checks(cs, &mut out);
    if !out.is_empty() {
        return out;
    }
    if nu.is_nan() || nu < 4.0 {
        out.push(format!("nu = {nu} must be >= 4"));
    }
    let expected = vr_tuned_gamma(cs.rho, cs.m, nu, cs.k, cs.smoothness);
    if !gamma_matches(cs.gamma, expected) {
        out.push(format!("gamma = {} differs from rho m^(1/3)/(nu k L) = {expected}", cs.gamma));
    }
    c_and_m_conditions_tau1(cs, &mut out);
    out
}

pub fn momentum_tuned_conditions(cs: &TheoryConstants, nu: f64) -> Vec<String> {
    let mut out = Vec::new();
    basic_checks(cs, &mut out);
    if !out.is_empty() {
        return out;
    }
    if nu.is_nan() || nu < 8.0 {
        out.push(format!("nu = {nu} must be >= 8"));
    }
    let expected = momentum_tuned_gamma(cs.rho, cs.m, nu, cs.k, cs.smoothness);
    if !gamma_matches(cs.gamma, expected) {
        out.push(format!("gamma = {} differs from rho m^(1/2)/(nu L k) = {expected}", cs.gamma));
    }
    c_and_m_conditions_tau0(cs, &mut out);
    out
}

fn check_h_norm(mean_h_norm_sq: f64) -> Result<()> {
    if mean_h_norm_sq.is_finite() && mean_h_norm_sq > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("mean_h_norm_sq", "must be positive and finite"))
    }
}

/// Bound on `(1/T)Σ E‖∇f(x_t)‖` given the empirical `(1/T)Σ ‖H_t‖²`:
/// `(√mean‖H‖²/ρ)(2√(2G')/T^{1/2} + 2√(2G')/(m^{1/6} T^{1/3}))` with
/// `G' = νL(f_1 - f*) + ν²σ²/8 + ν²k⁴c²σ² ln(m+T)/(4m^{1/3})`.
pub fn vr_tuned_bound(cs: &TheoryConstants, nu: f64, t: u64, mean_h_norm_sq: f64) -> Result<f64> {
    fail_if_any(vr_tuned_conditions(cs, nu))?;
    check_h_norm(mean_h_norm_sq)?;
    let tf = check_horizon(t)?;
    let s2 = cs.sigma * cs.sigma;
    let g_prime = nu * cs.smoothness * (cs.f1 - cs.f_star)
        + nu * nu * s2 / 8.0
        + nu * nu * cs.k.powi(4) * cs.c * cs.c * s2 * (cs.m + tf).ln() / (4.0 * cs.m.cbrt());
    let a = 2.0 * (2.0 * g_prime).sqrt();
    let cond = mean_h_norm_sq.sqrt() / cs.rho;
    Ok(cond * (a / tf.sqrt() + a / (cs.m.powf(1.0 / 6.0) * tf.cbrt())))
}

/// Momentum analogue with `M' = νL(f_1 - f*) + 2νσ² + 2νmσ² ln(m+T)` and
/// terms `2√(2M')/T^{1/2} + 2√(2M')/(m^{1/4} T^{1/4})`.
pub fn momentum_tuned_bound(cs: &TheoryConstants, nu: f64, t: u64, mean_h_norm_sq: f64) -> Result<f64> {
    fail_if_any(momentum_tuned_conditions(cs, nu))?;
    check_h_norm(mean_h_norm_sq)?;
    let tf = check_horizon(t)?;
    let s2 = cs.sigma * cs.sigma;
    let m_prime = nu * cs.smoothness * (cs.f1 - cs.f_star)
        + 2.0 * nu * s2
        + 2.0 * nu * cs.m * s2 * (cs.m + tf).ln();
    let a = 2.0 * (2.0 * m_prime).sqrt();
    let cond = mean_h_norm_sq.sqrt() / cs.rho;
    Ok(cond * (a / tf.sqrt() + a / (cs.m.powf(0.25) * tf.powf(0.25))))
}
