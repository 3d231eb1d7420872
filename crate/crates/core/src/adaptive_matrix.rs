//! Adaptive matrices `H_t = A_t + λI` and their generators.
//!
//! Four constructions are provided, all diagonal or scalar so that every
//! generated matrix is trivially invertible and satisfies `H_t ⪰ λI`:
//!
//! * case 1: coordinate-wise EMA of squared gradients, `diag(sqrt(v_t) + λ)`
//! * case 2: EMA of gradient norms, `(b_t + λ) I`
//! * case 3: Barzilai-Borwein curvature along the last step, `(b_t + λ) I`
//! * case 4: belief-style EMA of `(g - m_t)`, diagonal or scalar
//!
//! Generators carry no bias correction; all EMA buffers start at zero.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::ParamVector;

/// `‖x_t - x_{t-1}‖` below which the case-3 quotient is treated as degenerate.
pub const CASE3_DEGENERACY_THRESHOLD: f64 = 1e-12;

pub const DEFAULT_LAMBDA: f64 = 0.0005;
pub const DEFAULT_BETA: f64 = 0.999;

#[derive(Clone, Debug, PartialEq)]
pub enum AdaptiveMatrix {
    Diagonal(Vec<f64>),
    Scalar { value: f64, dim: usize },
}

impl AdaptiveMatrix {
    pub fn scalar(value: f64, dim: usize) -> Self {
        AdaptiveMatrix::Scalar { value, dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(1.0, dim)
    }

    pub fn dim(&self) -> usize {
        match self {
            AdaptiveMatrix::Diagonal(d) => d.len(),
            AdaptiveMatrix::Scalar { dim, .. } => *dim,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AdaptiveMatrix::Diagonal(_) => "diagonal",
            AdaptiveMatrix::Scalar { .. } => "scalar",
        }
    }

    #[inline]
    pub fn entry(&self, i: usize) -> f64 {
        match self {
            AdaptiveMatrix::Diagonal(d) => d[i],
            AdaptiveMatrix::Scalar { value, .. } => *value,
        }
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        match self {
            AdaptiveMatrix::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            AdaptiveMatrix::Scalar { value, .. } => *value,
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        match self {
            AdaptiveMatrix::Diagonal(d) => d.iter().copied().fold(0.0, f64::max),
            AdaptiveMatrix::Scalar { value, .. } => *value,
        }
    }

    pub fn condition_number(&self) -> f64 {
        self.spectral_norm() / self.smallest_eigenvalue()
    }

    /// `H v`
    pub fn apply(&self, v: &ParamVector) -> ParamVector {
        match self {
            AdaptiveMatrix::Diagonal(d) => {
                ParamVector::from_vec_unchecked(v.iter().zip(d).map(|(x, h)| x * h).collect())
            }
            AdaptiveMatrix::Scalar { value, .. } => v.scale(*value),
        }
    }

    /// `H^{-1} v`
    pub fn solve(&self, v: &ParamVector) -> ParamVector {
        match self {
            AdaptiveMatrix::Diagonal(d) => {
                ParamVector::from_vec_unchecked(v.iter().zip(d).map(|(x, h)| x / h).collect())
            }
            AdaptiveMatrix::Scalar { value, .. } => v.map(|x| x / value),
        }
    }

    /// `vᵀ H v`
    pub fn quad_form(&self, v: &ParamVector) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, x)| self.entry(i) * x * x)
            .sum()
    }

    pub fn is_positive_definite(&self) -> bool {
        let m = self.smallest_eigenvalue();
        m.is_finite() && m > 0.0 && self.spectral_norm().is_finite()
    }
}

/// Which construction generates `H_t`, with its EMA rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum MatrixCase {
    Case1 {
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Case2 {
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Case3,
    Case4Diag { beta1: f64, beta2: f64 },
    Case4Scalar { beta1: f64, beta2: f64 },
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl MatrixCase {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixCase::Case1 { .. } => "case1",
            MatrixCase::Case2 { .. } => "case2",
            MatrixCase::Case3 => "case3",
            MatrixCase::Case4Diag { .. } => "case4_diag",
            MatrixCase::Case4Scalar { .. } => "case4_scalar",
        }
    }

    /// Whether generation needs a gradient at the previous iterate.
    pub fn needs_previous_point(&self) -> bool {
        matches!(self, MatrixCase::Case3)
    }

    pub fn all_default() -> [MatrixCase; 5] {
        [
            MatrixCase::Case1 { beta: DEFAULT_BETA },
            MatrixCase::Case2 { beta: DEFAULT_BETA },
            MatrixCase::Case3,
            MatrixCase::Case4Diag {
                beta1: 0.9,
                beta2: 0.999,
            },
            MatrixCase::Case4Scalar {
                beta1: 0.9,
                beta2: 0.999,
            },
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    #[serde(flatten)]
    pub case: MatrixCase,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

impl MatrixConfig {
    pub fn new(case: MatrixCase, lambda: f64) -> Self {
        Self { case, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda", format!("{} must be > 0", self.lambda)));
        }
        let rate = |name: &'static str, b: f64| {
            if b > 0.0 && b < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{b} must lie in (0, 1)")))
            }
        };
        match self.case {
            MatrixCase::Case1 { beta } | MatrixCase::Case2 { beta } => rate("beta", beta),
            MatrixCase::Case3 => Ok(()),
            MatrixCase::Case4Diag { beta1, beta2 } | MatrixCase::Case4Scalar { beta1, beta2 } => {
                rate("beta1", beta1)?;
                rate("beta2", beta2)
            }
        }
    }
}

/// Mutable generator state: the EMA buffers `v`, `b`, `m`.
#[derive(Clone, Debug)]
pub struct MatrixGenerator {
    config: MatrixConfig,
    dim: usize,
    v: Vec<f64>,
    b: f64,
    m: Vec<f64>,
}

impl MatrixGenerator {
    pub fn new(config: MatrixConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            dim,
            v: vec![0.0; dim],
            b: 0.0,
            m: vec![0.0; dim],
        })
    }

    pub fn config(&self) -> &MatrixConfig {
        &self.config
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn norm_average(&self) -> f64 {
        self.b
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    fn wrong_case(&self, wanted: &str) -> Error {
        Error::Contract(format!(
            "generator configured for {} cannot run {wanted}",
            self.config.case.name()
        ))
    }

    /// `v_t = β v_{t-1} + (1-β) g²`, `H = diag(sqrt(v_t) + λ)`.
    pub fn generate_case1(&mut self, g: &ParamVector) -> Result<AdaptiveMatrix> {
        let MatrixCase::Case1 { beta } = self.config.case else {
            return Err(self.wrong_case("case1"));
        };
        check_dim(self.dim, g.dim())?;
        let lambda = self.config.lambda;
        for (v, gi) in self.v.iter_mut().zip(g) {
            *v = beta * *v + (1.0 - beta) * gi * gi;
        }
        Ok(AdaptiveMatrix::Diagonal(
            self.v.iter().map(|v| v.sqrt() + lambda).collect(),
        ))
    }

    /// `b_t = β b_{t-1} + (1-β) ‖g‖`, `H = (b_t + λ) I`.
    pub fn generate_case2(&mut self, g: &ParamVector) -> Result<AdaptiveMatrix> {
        let MatrixCase::Case2 { beta } = self.config.case else {
            return Err(self.wrong_case("case2"));
        };
        check_dim(self.dim, g.dim())?;
        self.b = beta * self.b + (1.0 - beta) * g.norm();
        Ok(AdaptiveMatrix::scalar(self.b + self.config.lambda, self.dim))
    }

    /// Barzilai-Borwein curvature: `b_t = |⟨∇f(x_t;ξ) - ∇f(x_{t-1};ξ), x_t - x_{t-1}⟩| / ‖x_t - x_{t-1}‖²`
    /// with both gradients taken at the same sample. A step shorter than
    /// [`CASE3_DEGENERACY_THRESHOLD`] yields `λ I`.
    pub fn generate_case3(
        &mut self,
        x_t: &ParamVector,
        x_prev: &ParamVector,
        grad_t: &ParamVector,
        grad_prev: &ParamVector,
    ) -> Result<AdaptiveMatrix> {
        if !matches!(self.config.case, MatrixCase::Case3) {
            return Err(self.wrong_case("case3"));
        }
        for v in [x_t, x_prev, grad_t, grad_prev] {
            check_dim(self.dim, v.dim())?;
        }
        let dx = x_t.sub(x_prev);
        let dx_sq = dx.norm_sq();
        self.b = if dx_sq.sqrt() < CASE3_DEGENERACY_THRESHOLD {
            0.0
        } else {
            grad_t.sub(grad_prev).dot(&dx).abs() / dx_sq
        };
        Ok(AdaptiveMatrix::scalar(self.b + self.config.lambda, self.dim))
    }

    /// Case 3 at the first iteration, where no previous iterate exists.
    pub fn generate_case3_initial(&mut self) -> Result<AdaptiveMatrix> {
        if !matches!(self.config.case, MatrixCase::Case3) {
            return Err(self.wrong_case("case3"));
        }
        self.b = 0.0;
        Ok(AdaptiveMatrix::scalar(self.config.lambda, self.dim))
    }

    /// `m_t = β₁ m_{t-1} + (1-β₁) g`, then the second-moment EMA of `g - m_t`.
    pub fn generate_case4(&mut self, g: &ParamVector) -> Result<AdaptiveMatrix> {
        let (beta1, beta2, diagonal) = match self.config.case {
            MatrixCase::Case4Diag { beta1, beta2 } => (beta1, beta2, true),
            MatrixCase::Case4Scalar { beta1, beta2 } => (beta1, beta2, false),
            _ => return Err(self.wrong_case("case4")),
        };
        check_dim(self.dim, g.dim())?;
        let lambda = self.config.lambda;
        for (m, gi) in self.m.iter_mut().zip(g) {
            *m = beta1 * *m + (1.0 - beta1) * gi;
        }
        if diagonal {
            for ((v, m), gi) in self.v.iter_mut().zip(&self.m).zip(g) {
                let r = gi - m;
                *v = beta2 * *v + (1.0 - beta2) * r * r;
            }
            Ok(AdaptiveMatrix::Diagonal(
                self.v.iter().map(|v| v.sqrt() + lambda).collect(),
            ))
        } else {
            let resid: f64 = g
                .iter()
                .zip(&self.m)
                .map(|(gi, m)| (gi - m) * (gi - m))
                .sum::<f64>()
                .sqrt();
            self.b = beta2 * self.b + (1.0 - beta2) * resid;
            Ok(AdaptiveMatrix::scalar(self.b + lambda, self.dim))
        }
    }

    /// Dispatch on the configured case. `previous` carries `(x_{t-1}, ∇f(x_{t-1};ξ))`
    /// for case 3 and is ignored otherwise.
    pub fn generate(
        &mut self,
        x_t: &ParamVector,
        grad_t: &ParamVector,
        previous: Option<(&ParamVector, &ParamVector)>,
    ) -> Result<AdaptiveMatrix> {
        match self.config.case {
            MatrixCase::Case1 { .. } => self.generate_case1(grad_t),
            MatrixCase::Case2 { .. } => self.generate_case2(grad_t),
            MatrixCase::Case3 => match previous {
                Some((x_prev, grad_prev)) => self.generate_case3(x_t, x_prev, grad_t, grad_prev),
                None => self.generate_case3_initial(),
            },
            MatrixCase::Case4Diag { .. } | MatrixCase::Case4Scalar { .. } => {
                self.generate_case4(grad_t)
            }
        }
    }
}
