//! Update rules of the reference optimizers. Each `step` takes the current
//! point and stochastic gradient and returns the unprojected next point.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::ParamVector;

/// `a / b` with `0 / 0` read as `0`; only arises on coordinates whose
/// gradients have all been zero.
fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 && a == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn base_rate(eta: f64, t: u64, decreasing: bool) -> f64 {
    if decreasing {
        eta / (t as f64).sqrt()
    } else {
        eta
    }
}

/// `v_t = (1/t) Σ g_j²` (or the running sum), `x_{t+1} = x_t - η_t g_t/√v_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adagrad {
    pub eta: f64,
    pub decreasing: bool,
    /// Use `Σ g_j²` instead of the average.
    pub running_sum: bool,
    sum_sq: Vec<f64>,
    t: u64,
}

impl Adagrad {
    pub fn new(dim: usize, eta: f64, decreasing: bool, running_sum: bool) -> Self {
        Self {
            eta,
            decreasing,
            running_sum,
            sum_sq: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        check_dim(self.sum_sq.len(), g.dim())?;
        self.t += 1;
        let eta_t = base_rate(self.eta, self.t, self.decreasing);
        let scale = if self.running_sum { 1.0 } else { 1.0 / self.t as f64 };
        for (s, gi) in self.sum_sq.iter_mut().zip(g.iter()) {
            *s += gi * gi;
        }
        Ok(ParamVector::from_vec_unchecked(
            x.iter()
                .zip(g.iter().zip(&self.sum_sq))
                .map(|(x, (g, s))| x - eta_t * ratio(*g, (s * scale).sqrt()))
                .collect(),
        ))
    }

    pub fn second_moment(&self) -> Vec<f64> {
        let scale = if self.running_sum || self.t == 0 {
            1.0
        } else {
            1.0 / self.t as f64
        };
        self.sum_sq.iter().map(|s| s * scale).collect()
    }
}

/// Shared first/second-moment buffers of the Adam family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub beta1: f64,
    pub beta2: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Moments {
    fn new(dim: usize, beta1: f64, beta2: f64) -> Self {
        Self {
            beta1,
            beta2,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    fn update(&mut self, g: &ParamVector) -> Result<()> {
        check_dim(self.m.len(), g.dim())?;
        self.t += 1;
        for ((m, v), gi) in self.m.iter_mut().zip(self.v.iter_mut()).zip(g.iter()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
            *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.t as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }
}

/// Adam: `x_{t+1} = x_t - η_t m̂_t/(√v̂_t + ε)` with bias-corrected moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub eta: f64,
    pub eps: f64,
    pub decreasing: bool,
    pub bias_correction: bool,
    /// Start the first moment at `m_1 = g_1` instead of the zero-initialised EMA.
    pub first_moment_from_gradient: bool,
    pub moments: Moments,
}

impl Adam {
    pub fn new(dim: usize, eta: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            eta,
            eps,
            decreasing: true,
            bias_correction: true,
            first_moment_from_gradient: false,
            moments: Moments::new(dim, beta1, beta2),
        }
    }

    /// The first-moment estimate that drives the step (`m̂_t` or `m_t`).
    pub fn direction(&self) -> ParamVector {
        let (c1, _) = self.moments.corrections();
        let c1 = if self.bias_correction { c1 } else { 1.0 };
        ParamVector::from_vec_unchecked(self.moments.m.iter().map(|m| m / c1).collect())
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        let first = self.moments.t == 0;
        self.moments.update(g)?;
        if first && self.first_moment_from_gradient {
            self.moments.m = g.as_slice().to_vec();
        }
        let eta_t = base_rate(self.eta, self.moments.t, self.decreasing);
        let (c1, c2) = if self.bias_correction {
            self.moments.corrections()
        } else {
            (1.0, 1.0)
        };
        Ok(ParamVector::from_vec_unchecked(
            x.iter()
                .zip(self.moments.m.iter().zip(&self.moments.v))
                .map(|(x, (m, v))| x - eta_t * (m / c1) / ((v / c2).sqrt() + self.eps))
                .collect(),
        ))
    }
}

/// AMSGrad: `v̂_t = max(v̂_{t-1}, v_t)`, `x_{t+1} = x_t - η_t m_t/√v̂_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amsgrad {
    pub eta: f64,
    pub decreasing: bool,
    pub moments: Moments,
    pub v_hat: Vec<f64>,
}

impl Amsgrad {
    pub fn new(dim: usize, eta: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            eta,
            decreasing: true,
            moments: Moments::new(dim, beta1, beta2),
            v_hat: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        self.moments.update(g)?;
        for (vh, v) in self.v_hat.iter_mut().zip(&self.moments.v) {
            *vh = vh.max(*v);
        }
        let eta_t = base_rate(self.eta, self.moments.t, self.decreasing);
        Ok(ParamVector::from_vec_unchecked(
            x.iter()
                .zip(self.moments.m.iter().zip(&self.v_hat))
                .map(|(x, (m, vh))| x - eta_t * ratio(*m, vh.sqrt()))
                .collect(),
        ))
    }
}

/// AdamW: `x_{t+1} = x_t - η_t(α m̂_t/(√v̂_t + ε) + λ x_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub eta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub weight_decay: f64,
    pub decreasing: bool,
    pub moments: Moments,
}

impl AdamW {
    pub fn new(dim: usize, eta: f64, beta1: f64, beta2: f64, eps: f64, alpha: f64, weight_decay: f64) -> Self {
        Self {
            eta,
            eps,
            alpha,
            weight_decay,
            decreasing: false,
            moments: Moments::new(dim, beta1, beta2),
        }
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        self.moments.update(g)?;
        let eta_t = base_rate(self.eta, self.moments.t, self.decreasing);
        let (c1, c2) = self.moments.corrections();
        Ok(ParamVector::from_vec_unchecked(
            x.iter()
                .zip(self.moments.m.iter().zip(&self.moments.v))
                .map(|(x, (m, v))| {
                    x - eta_t * (self.alpha * (m / c1) / ((v / c2).sqrt() + self.eps) + self.weight_decay * x)
                })
                .collect(),
        ))
    }
}

/// AdaBelief: `v_t = α₂ v_{t-1} + (1-α₂)(g - m_t)² + ε`, bias-corrected Adam step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaBelief {
    pub eta: f64,
    pub eps: f64,
    pub decreasing: bool,
    pub moments: Moments,
}

impl AdaBelief {
    pub fn new(dim: usize, eta: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            eta,
            eps,
            decreasing: true,
            moments: Moments::new(dim, beta1, beta2),
        }
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        check_dim(self.moments.m.len(), g.dim())?;
        let mo = &mut self.moments;
        mo.t += 1;
        for ((m, v), gi) in mo.m.iter_mut().zip(mo.v.iter_mut()).zip(g.iter()) {
            *m = mo.beta1 * *m + (1.0 - mo.beta1) * gi;
            let r = gi - *m;
            *v = mo.beta2 * *v + (1.0 - mo.beta2) * r * r + self.eps;
        }
        let eta_t = base_rate(self.eta, mo.t, self.decreasing);
        let (c1, c2) = mo.corrections();
        Ok(ParamVector::from_vec_unchecked(
            x.iter()
                .zip(mo.m.iter().zip(&mo.v))
                .map(|(x, (m, v))| x - eta_t * (m / c1) / ((v / c2).sqrt() + self.eps))
                .collect(),
        ))
    }
}

/// AdaGrad-Norm: `b_t² = b_{t-1}² + ‖g‖²`, `x ← x - η g/b_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdagradNorm {
    pub eta: f64,
    pub b_sq: f64,
}

impl AdagradNorm {
    pub fn new(eta: f64, b0: f64) -> Result<Self> {
        if !(b0 > 0.0 && b0.is_finite()) {
            return Err(Error::invalid("b0", "must be > 0"));
        }
        Ok(Self { eta, b_sq: b0 * b0 })
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        self.b_sq += g.norm_sq();
        let b = self.b_sq.sqrt();
        Ok(x.zip_map(g, |x, g| x - self.eta * g / b))
    }
}

/// Adaptive-SGD: `η_t = k/(ω + Σ_{i<t}‖g_i‖²)^{1/2+ε}`, `x ← x - η_t g_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSgd {
    pub k: f64,
    pub omega: f64,
    pub eps: f64,
    pub sum_sq: f64,
}

impl AdaptiveSgd {
    pub fn new(k: f64, omega: f64, eps: f64) -> Self {
        Self {
            k,
            omega,
            eps,
            sum_sq: 0.0,
        }
    }

    pub fn rate(&self) -> f64 {
        self.k / (self.omega + self.sum_sq).powf(0.5 + self.eps)
    }

    pub fn step(&mut self, x: &ParamVector, g: &ParamVector) -> Result<ParamVector> {
        check_dim(x.dim(), g.dim())?;
        let eta = self.rate();
        self.sum_sq += g.norm_sq();
        Ok(x.zip_map(g, |x, g| x - eta * g))
    }
}

/// STORM: `η_t = k/(ω + Σ_{i≤t}‖∇f(x_i;ξ_i)‖²)^{1/3}`, `x_{t+1} = x_t - η_t g_t`,
/// `g_{t+1} = ∇f(x_{t+1};ξ_{t+1}) + (1 - cη_t²)(g_t - ∇f(x_t;ξ_{t+1}))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Storm {
    pub k: f64,
    pub omega: f64,
    pub c: f64,
    pub sum_sq: f64,
    pub g: ParamVector,
    pub t: u64,
}

impl Storm {
    /// `g_1 = ∇f(x_1; ξ_1)`.
    pub fn new(k: f64, omega: f64, c: f64, first_gradient: ParamVector) -> Self {
        Self {
            k,
            omega,
            c,
            sum_sq: 0.0,
            g: first_gradient,
            t: 1,
        }
    }

    /// Folds in `‖∇f(x_t;ξ_t)‖²` and returns `η_t`.
    pub fn advance_rate(&mut self, sample_grad_at_x: &ParamVector) -> f64 {
        self.sum_sq += sample_grad_at_x.norm_sq();
        self.k / (self.omega + self.sum_sq).cbrt()
    }

    /// `x_t - η_t g_t`.
    pub fn step_point(&self, x: &ParamVector, eta: f64) -> Result<ParamVector> {
        check_dim(x.dim(), self.g.dim())?;
        Ok(x.zip_map(&self.g, |x, g| x - eta * g))
    }

    /// Estimator update with both gradients at the fresh sample `ξ_{t+1}`.
    pub fn update_estimate(
        &mut self,
        eta: f64,
        grad_new_at_xnew: &ParamVector,
        grad_new_at_xold: &ParamVector,
    ) -> Result<&ParamVector> {
        check_dim(self.g.dim(), grad_new_at_xnew.dim())?;
        check_dim(self.g.dim(), grad_new_at_xold.dim())?;
        let keep = 1.0 - self.c * eta * eta;
        self.g = ParamVector::from_vec_unchecked(
            grad_new_at_xnew
                .iter()
                .zip(self.g.iter().zip(grad_new_at_xold))
                .map(|(fresh, (g, o))| fresh + keep * (g - o))
                .collect(),
        );
        self.t += 1;
        Ok(&self.g)
    }
}
