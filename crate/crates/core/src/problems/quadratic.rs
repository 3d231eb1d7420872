use crate::error::{check_dim, Error, Result};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::oracle::{Components, OracleMetadata, Sample, StochasticOracle};
use crate::rng::SeededRng;
use crate::vector::ParamVector;

/// `f(x) = (1/n) Σ_i [½ xᵀ Q_i x + c_iᵀ x]` with diagonal `Q_i ⪰ 0`.
///
/// Smoothness is the largest curvature over all components. The noise bound
/// is the supremum of the exact gradient variance over the domain's bounding
/// box, and `f*` is the exact minimum over that box.
#[derive(Clone, Debug)]
pub struct FiniteSumQuadratic {
    curvatures: Vec<Vec<f64>>,
    linear: Vec<Vec<f64>>,
    mean_curvature: Vec<f64>,
    mean_linear: Vec<f64>,
    domain: FeasibleSet,
    x0: ParamVector,
    metadata: OracleMetadata,
}

impl FiniteSumQuadratic {
    pub fn new(
        curvatures: Vec<Vec<f64>>,
        linear: Vec<Vec<f64>>,
        domain: FeasibleSet,
        x0: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = curvatures.len();
        if n == 0 {
            return Err(Error::invalid("curvatures", "at least one component required"));
        }
        check_dim(n, linear.len())?;
        let d = curvatures[0].len();
        if d == 0 {
            return Err(Error::invalid("curvatures", "dimension must be positive"));
        }
        for (q, c) in curvatures.iter().zip(&linear) {
            check_dim(d, q.len())?;
            check_dim(d, c.len())?;
            if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("curvatures", "entries must be finite and >= 0"));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("linear", "entries must be finite"));
            }
        }
        domain.validate()?;
        domain.check_compatible(d)?;

        let inv_n = 1.0 / n as f64;
        let mean = |rows: &[Vec<f64>]| -> Vec<f64> {
            (0..d)
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() * inv_n)
                .collect()
        };
        let mean_curvature = mean(&curvatures);
        let mean_linear = mean(&linear);

        let x0 = match x0 {
            Some(v) => {
                check_dim(d, v.len())?;
                ParamVector::new(v)?
            }
            None => euclidean_project(&ParamVector::filled(d, 1.0), &domain)?,
        };

        let mut problem = Self {
            curvatures,
            linear,
            mean_curvature,
            mean_linear,
            domain,
            x0,
            metadata: OracleMetadata::default(),
        };
        problem.metadata = problem.compute_metadata();
        Ok(problem)
    }

    /// Random diagonal curvatures in `[curvature_min, curvature_max]` and
    /// Gaussian linear terms with standard deviation `linear_scale`.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        dim: usize,
        components: usize,
        data_seed: u64,
        curvature_min: f64,
        curvature_max: f64,
        linear_scale: f64,
        domain: FeasibleSet,
        x0: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 || components == 0 {
            return Err(Error::invalid("dim/components", "must be positive"));
        }
        if !(0.0 <= curvature_min && curvature_min <= curvature_max && curvature_max.is_finite()) {
            return Err(Error::invalid(
                "curvature",
                format!("need 0 <= min ({curvature_min}) <= max ({curvature_max})"),
            ));
        }
        if !(linear_scale.is_finite() && linear_scale >= 0.0) {
            return Err(Error::invalid("linear_scale", "must be finite and >= 0"));
        }
        let mut rng = SeededRng::new(data_seed);
        let curvatures = (0..components)
            .map(|_| (0..dim).map(|_| rng.uniform(curvature_min, curvature_max)).collect())
            .collect();
        let linear = (0..components)
            .map(|_| (0..dim).map(|_| linear_scale * rng.standard_normal()).collect())
            .collect();
        Self::new(curvatures, linear, domain, x0)
    }

    pub fn n_components(&self) -> usize {
        self.curvatures.len()
    }

    pub fn mean_curvature(&self) -> &[f64] {
        &self.mean_curvature
    }

    fn compute_metadata(&self) -> OracleMetadata {
        let n = self.curvatures.len() as f64;
        let d = self.mean_curvature.len();
        let smoothness = self
            .curvatures
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max);

        // per-coordinate variance A x² + 2B x + C is convex in x
        let mut coeffs = Vec::with_capacity(d);
        for j in 0..d {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (q, l) in self.curvatures.iter().zip(&self.linear) {
                let dq = q[j] - self.mean_curvature[j];
                let dc = l[j] - self.mean_linear[j];
                a += dq * dq;
                b += dq * dc;
                c += dc * dc;
            }
            coeffs.push((a / n, b / n, c / n));
        }
        let bbox = self.domain.bounding_box();
        let noise_sigma = match &bbox {
            Some((lo, hi)) => {
                let var: f64 = coeffs
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(&(a, b, c), (l, u))| {
                        let at = |x: f64| a * x * x + 2.0 * b * x + c;
                        at(*l).max(at(*u)).max(0.0)
                    })
                    .sum();
                Some(var.sqrt())
            }
            None if coeffs.iter().all(|(a, _, _)| *a == 0.0) => {
                Some(coeffs.iter().map(|(_, _, c)| c).sum::<f64>().sqrt())
            }
            None => None,
        };

        let f_star = match &bbox {
            Some((lo, hi)) => Some(
                (0..d)
                    .map(|j| {
                        let (q, c) = (self.mean_curvature[j], self.mean_linear[j]);
                        let phi = |x: f64| 0.5 * q * x * x + c * x;
                        if q > 0.0 {
                            phi((-c / q).clamp(lo[j], hi[j]))
                        } else {
                            phi(lo[j]).min(phi(hi[j]))
                        }
                    })
                    .sum(),
            ),
            None => {
                let bounded = (0..d).all(|j| self.mean_curvature[j] > 0.0 || self.mean_linear[j] == 0.0);
                bounded.then(|| {
                    (0..d)
                        .filter(|&j| self.mean_curvature[j] > 0.0)
                        .map(|j| {
                            let (q, c) = (self.mean_curvature[j], self.mean_linear[j]);
                            -0.5 * c * c / q
                        })
                        .sum()
                })
            }
        };

        OracleMetadata {
            smoothness: (smoothness > 0.0).then_some(smoothness),
            noise_sigma,
            f_star_lower_bound: f_star,
        }
    }
}

impl StochasticOracle for FiniteSumQuadratic {
    fn dim(&self) -> usize {
        self.mean_curvature.len()
    }

    fn components(&self) -> Components {
        Components::Finite(self.curvatures.len() as u64)
    }

    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector {
        let i = xi.0 as usize;
        let (q, c) = (&self.curvatures[i], &self.linear[i]);
        ParamVector::from_vec_unchecked(
            x.iter()
                .zip(q.iter().zip(c))
                .map(|(x, (q, c))| q * x + c)
                .collect(),
        )
    }

    fn full_grad(&self, x: &ParamVector) -> ParamVector {
        ParamVector::from_vec_unchecked(
            x.iter()
                .zip(self.mean_curvature.iter().zip(&self.mean_linear))
                .map(|(x, (q, c))| q * x + c)
                .collect(),
        )
    }

    fn value(&self, x: &ParamVector) -> f64 {
        x.iter()
            .zip(self.mean_curvature.iter().zip(&self.mean_linear))
            .map(|(x, (q, c))| 0.5 * q * x * x + c * x)
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
