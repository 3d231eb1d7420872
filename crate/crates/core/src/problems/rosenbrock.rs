use crate::error::{check_dim, Error, Result};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::oracle::{Components, OracleMetadata, Sample, StochasticOracle};
use crate::rng::SeededRng;
use crate::vector::ParamVector;

/// Chained Rosenbrock function with additive Gaussian gradient noise.
///
/// `f(x) = Σ_{j<d-1} 100 (x_{j+1} - x_j²)² + (1 - x_j)²` and
/// `∇f(x; ξ) = ∇f(x) + σ z(ξ)` with `z(ξ) ~ N(0, I)` keyed by `ξ`. Each
/// component differs from `f` by a linear term, so the smoothness reported
/// over a bounded domain is a Gershgorin bound on the Hessian there.
#[derive(Clone, Debug)]
pub struct StochasticRosenbrock {
    dim: usize,
    noise_sigma: f64,
    domain: FeasibleSet,
    x0: ParamVector,
    metadata: OracleMetadata,
}

impl StochasticRosenbrock {
    pub fn new(dim: usize, noise_sigma: f64, domain: FeasibleSet, x0: Option<Vec<f64>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dim", "Rosenbrock needs dim >= 2"));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        domain.validate()?;
        domain.check_compatible(dim)?;
        let x0 = match x0 {
            Some(v) => {
                check_dim(dim, v.len())?;
                ParamVector::new(v)?
            }
            None => {
                let start = (0..dim).map(|j| if j % 2 == 0 { -1.2 } else { 1.0 }).collect();
                euclidean_project(&ParamVector::new(start)?, &domain)?
            }
        };
        let smoothness = domain.bounding_box().map(|(lo, hi)| {
            let r: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| l.abs().max(u.abs())).collect();
            hessian_row_bound(&r)
        });
        Ok(Self {
            dim,
            noise_sigma,
            domain,
            x0,
            metadata: OracleMetadata {
                smoothness,
                noise_sigma: Some(noise_sigma * (dim as f64).sqrt()),
                f_star_lower_bound: Some(0.0),
            },
        })
    }

    fn noise(&self, xi: Sample) -> Vec<f64> {
        let mut rng = SeededRng::new(xi.0);
        (0..self.dim).map(|_| self.noise_sigma * rng.standard_normal()).collect()
    }
}

/// Max Gershgorin row sum of `|∇²f|` when `|x_j| ≤ r_j`.
fn hessian_row_bound(r: &[f64]) -> f64 {
    let d = r.len();
    (0..d)
        .map(|j| {
            let mut row = 0.0;
            if j + 1 < d {
                row += 1200.0 * r[j] * r[j] + 400.0 * r[j + 1] + 2.0 + 400.0 * r[j];
            }
            if j > 0 {
                row += 200.0 + 400.0 * r[j - 1];
            }
            row
        })
        .fold(0.0, f64::max)
}

impl StochasticOracle for StochasticRosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn components(&self) -> Components {
        Components::Infinite
    }

    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector {
        let full = self.full_grad(x);
        if self.noise_sigma == 0.0 {
            return full;
        }
        let noise = self.noise(xi);
        ParamVector::from_vec_unchecked(full.iter().zip(noise).map(|(g, n)| g + n).collect())
    }

    fn full_grad(&self, x: &ParamVector) -> ParamVector {
        let d = self.dim;
        let mut g = vec![0.0; d];
        for j in 0..d - 1 {
            let r = x[j + 1] - x[j] * x[j];
            g[j] += -400.0 * x[j] * r - 2.0 * (1.0 - x[j]);
            g[j + 1] += 200.0 * r;
        }
        ParamVector::from_vec_unchecked(g)
    }

    fn value(&self, x: &ParamVector) -> f64 {
        (0..self.dim - 1)
            .map(|j| {
                let r = x[j + 1] - x[j] * x[j];
                100.0 * r * r + (1.0 - x[j]).powi(2)
            })
            .sum()
    }

    fn metadata(&self) -> OracleMetadata {
        self.metadata
    }

    fn domain(&self) -> FeasibleSet {
        self.domain.clone()
    }

    fn initial_point(&self) -> ParamVector {
        self.x0.clone()
    }
}
