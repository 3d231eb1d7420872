//! Convergence measures, per-step lemma checks and theorem bounds.

mod bounds;
mod lemmas;

use serde::{Deserialize, Serialize};

pub use bounds::{
    vr_tuned_bound, vr_tuned_conditions, vr_tuned_gamma, momentum_tuned_bound,
    momentum_tuned_conditions, momentum_tuned_gamma, vr_rate_bound, vr_rate_conditions, vr_rate_g,
    momentum_rate_bound, momentum_rate_conditions, momentum_rate_m, TheoryConstants,
};
pub use lemmas::{b1_slack, estimator_error_bound, monte_carlo_estimator_check, FrozenState, MonteCarloCheck};

use crate::error::{check_dim, Error, Result};
use crate::vector::ParamVector;

pub const CSV_HEADER: &str = "t,f,grad_norm,est_err,step_norm,Mt,gradmap_norm,condH,mu,alpha,b1_slack";

/// One recorded iteration. Optional columns are empty for optimizers that
/// have no such quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: u64,
    pub f: f64,
    pub grad_norm: f64,
    /// `‖∇f(x_t) - g_t‖`.
    pub est_err: f64,
    /// `‖x̃_{t+1} - x_t‖`.
    pub step_norm: f64,
    pub mt: f64,
    /// `‖G_X(x_t, ∇f(x_t), γ)‖`.
    pub gradmap_norm: f64,
    pub cond_h: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub b1_slack: Option<f64>,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            format_float(self.f),
            format_float(self.grad_norm),
            format_float(self.est_err),
            format_float(self.step_norm),
            format_float(self.mt),
            format_float(self.gradmap_norm),
            format_opt(self.cond_h),
            format_opt(self.mu),
            format_opt(self.alpha),
            format_opt(self.b1_slack),
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.trim_end().split(',').collect();
        if cols.len() != 11 {
            return Err(Error::Contract(format!(
                "CSV row has {} columns, expected 11",
                cols.len()
            )));
        }
        let bad = |c: &str| Error::Contract(format!("unparsable CSV field `{c}`"));
        let req = |c: &str| c.parse::<f64>().map_err(|_| bad(c));
        let opt = |c: &str| {
            if c.is_empty() {
                Ok(None)
            } else {
                c.parse::<f64>().map(Some).map_err(|_| bad(c))
            }
        };
        Ok(Self {
            t: cols[0].parse().map_err(|_| bad(cols[0]))?,
            f: req(cols[1])?,
            grad_norm: req(cols[2])?,
            est_err: req(cols[3])?,
            step_norm: req(cols[4])?,
            mt: req(cols[5])?,
            gradmap_norm: req(cols[6])?,
            cond_h: opt(cols[7])?,
            mu: opt(cols[8])?,
            alpha: opt(cols[9])?,
            b1_slack: opt(cols[10])?,
        })
    }
}

/// `M_t = (1/ρ)‖∇f(x_t) - g_t‖ + (1/γ)‖x̃_{t+1} - x_t‖`.
pub fn measure_mt(
    full_grad: &ParamVector,
    g: &ParamVector,
    x: &ParamVector,
    x_tilde: &ParamVector,
    rho: f64,
    gamma: f64,
) -> Result<f64> {
    if !(rho > 0.0 && gamma > 0.0) {
        return Err(Error::invalid("rho/gamma", "must be positive"));
    }
    let d = x.dim();
    check_dim(d, full_grad.dim())?;
    check_dim(d, g.dim())?;
    check_dim(d, x_tilde.dim())?;
    Ok(measure_mt_from_norms(full_grad.distance(g), x_tilde.distance(x), rho, gamma))
}

pub fn measure_mt_from_norms(est_err: f64, step_norm: f64, rho: f64, gamma: f64) -> f64 {
    est_err / rho + step_norm / gamma
}

/// Least-squares slope of `ln y` against `ln T`.
///
/// Needs at least four points covering at least 1.5 decades of `T`, all
/// with positive values.
pub fn slope_estimate(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 4 {
        return Err(Error::invalid("series", format!("{} points, need at least 4", series.len())));
    }
    if series.iter().any(|(t, y)| !(*t > 0.0 && *y > 0.0 && t.is_finite() && y.is_finite())) {
        return Err(Error::invalid("series", "T and values must be positive and finite"));
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (t, _)| (lo.min(*t), hi.max(*t)));
    if (hi / lo).log10() < 1.5 {
        return Err(Error::invalid(
            "series",
            format!("T spans {:.3} decades, need at least 1.5", (hi / lo).log10()),
        ));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Running prefix averages of a per-step series, sampled at the given
/// checkpoint lengths (1-based).
pub fn prefix_averages(values: &[f64], checkpoints: &[u64]) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut sum = 0.0;
    let mut idx = 0usize;
    let mut sorted: Vec<u64> = checkpoints.to_vec();
    sorted.sort_unstable();
    for &cp in &sorted {
        let cp_us = cp as usize;
        if cp == 0 || cp_us > values.len() {
            continue;
        }
        while idx < cp_us {
            sum += values[idx];
            idx += 1;
        }
        out.push((cp, sum / cp as f64));
    }
    out
}
