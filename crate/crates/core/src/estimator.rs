//! Momentum (`τ = 0`) and variance-reduced (`τ = 1`) gradient estimators,
//! with the decreasing schedules for the averaging weight `μ_t` and the
//! estimator weight `α_{t+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::ParamVector;

pub const DEFAULT_ALPHA_CAP: f64 = 0.9;

/// Estimator variant `τ`. Serialized as the integer `0` or `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Tau {
    Momentum,
    VarianceReduced,
}

impl Tau {
    pub fn as_u8(self) -> u8 {
        match self {
            Tau::Momentum => 0,
            Tau::VarianceReduced => 1,
        }
    }
}

impl TryFrom<u8> for Tau {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Tau::Momentum),
            1 => Ok(Tau::VarianceReduced),
            other => Err(format!("tau must be 0 or 1, got {other}")),
        }
    }
}

impl From<Tau> for u8 {
    fn from(t: Tau) -> u8 {
        t.as_u8()
    }
}

/// `μ_t = k/(m+t)^{1/3}`, `α_{t+1} = min(c μ_t², cap)` for `τ = 1`;
/// `μ_t = k/(m+t)^{1/2}`, `α_{t+1} = min(c μ_t, cap)` for `τ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub tau: Tau,
    pub k: f64,
    pub m: f64,
    pub c: f64,
    pub gamma: f64,
    #[serde(default = "default_alpha_cap")]
    pub alpha_cap: f64,
}

fn default_alpha_cap() -> f64 {
    DEFAULT_ALPHA_CAP
}

impl Schedule {
    pub fn new(tau: Tau, k: f64, m: f64, c: f64, gamma: f64) -> Result<Self> {
        Self::with_cap(tau, k, m, c, gamma, DEFAULT_ALPHA_CAP)
    }

    pub fn with_cap(tau: Tau, k: f64, m: f64, c: f64, gamma: f64, alpha_cap: f64) -> Result<Self> {
        let s = Self {
            tau,
            k,
            m,
            c,
            gamma,
            alpha_cap,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be > 0")))
            }
        };
        positive("k", self.k)?;
        positive("c", self.c)?;
        positive("gamma", self.gamma)?;
        if !(self.alpha_cap > 0.0 && self.alpha_cap <= 1.0) {
            return Err(Error::invalid(
                "alpha_cap",
                format!("{} must lie in (0, 1]", self.alpha_cap),
            ));
        }
        // equivalent to μ_0 ≤ 1
        let min_m = match self.tau {
            Tau::VarianceReduced => self.k.powi(3),
            Tau::Momentum => self.k.powi(2),
        };
        if !(self.m.is_finite() && self.m > 0.0 && self.m >= min_m) {
            let bound = if self.tau == Tau::VarianceReduced {
                "k^3"
            } else {
                "k^2"
            };
            return Err(Error::invalid(
                "m",
                format!("{} must be at least {bound} = {min_m}", self.m),
            ));
        }
        Ok(())
    }

    pub fn mu(&self, t: u64) -> f64 {
        let base = self.m + t as f64;
        match self.tau {
            Tau::VarianceReduced => self.k / base.cbrt(),
            Tau::Momentum => self.k / base.sqrt(),
        }
    }

    /// `α_{t+1}`, built from `μ_t`.
    pub fn alpha(&self, t: u64) -> f64 {
        let mu = self.mu(t);
        let raw = match self.tau {
            Tau::VarianceReduced => self.c * mu * mu,
            Tau::Momentum => self.c * mu,
        };
        raw.min(self.alpha_cap)
    }
}

/// Current gradient estimate `g_t` and step counter `t`.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    g: ParamVector,
    t: u64,
}

impl EstimatorState {
    /// `g_1 = ∇f(x_1; ξ_1)`.
    pub fn new(first_gradient: ParamVector) -> Self {
        Self {
            g: first_gradient,
            t: 1,
        }
    }

    pub fn estimate(&self) -> &ParamVector {
        &self.g
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Advance with the scheduled `α_{t+1}` (uses `μ_t` at the current `t`).
    pub fn update(
        &mut self,
        schedule: &Schedule,
        grad_new_at_xnew: &ParamVector,
        grad_new_at_xold: Option<&ParamVector>,
    ) -> Result<&ParamVector> {
        let alpha = schedule.alpha(self.t);
        self.update_with_alpha(schedule.tau, alpha, grad_new_at_xnew, grad_new_at_xold)
    }

    /// `g_{t+1} = α ∇f(x_{t+1};ξ) + (1-α)[g_t + τ(∇f(x_{t+1};ξ) - ∇f(x_t;ξ))]`.
    ///
    /// Both gradients must share the fresh sample `ξ_{t+1}`. The `τ = 1` form
    /// is evaluated as `∇f(x_{t+1};ξ) + (1-α)(g_t - ∇f(x_t;ξ))`, which is the
    /// same expression regrouped; on an exact oracle the correction term is
    /// then exactly zero.
    pub fn update_with_alpha(
        &mut self,
        tau: Tau,
        alpha: f64,
        grad_new_at_xnew: &ParamVector,
        grad_new_at_xold: Option<&ParamVector>,
    ) -> Result<&ParamVector> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Contract(format!("alpha {alpha} outside (0, 1]")));
        }
        check_dim(self.g.dim(), grad_new_at_xnew.dim())?;
        let keep = 1.0 - alpha;
        self.g = match tau {
            Tau::Momentum => self
                .g
                .zip_map(grad_new_at_xnew, |g, fresh| alpha * fresh + keep * g),
            Tau::VarianceReduced => {
                let old = grad_new_at_xold.ok_or_else(|| {
                    Error::Contract("tau = 1 requires the gradient at the previous iterate".into())
                })?;
                check_dim(self.g.dim(), old.dim())?;
                ParamVector::from_vec_unchecked(
                    grad_new_at_xnew
                        .iter()
                        .zip(self.g.iter().zip(old))
                        .map(|(fresh, (g, o))| fresh + keep * (g - o))
                        .collect(),
                )
            }
        };
        self.t += 1;
        Ok(&self.g)
    }
}
