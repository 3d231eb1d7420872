use crate::error::{check_dim, Error, Result};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::oracle::{Components, OracleMetadata, Sample, StochasticOracle};
use crate::rng::SeededRng;
use crate::vector::ParamVector;

/// Upper bound on `sup_z |φ''(z)|` for `φ(z) = (1 - sigmoid(z))²`, attained
/// near `sigmoid(z) ≈ 0.61436`.
pub const SIGMOID_SQUARED_CURVATURE: f64 = 0.154_058_570_121_351;

/// `sup_z |φ'(z)|` for the sigmoid-squared loss, attained at `sigmoid(z) = 1/3`.
pub const SIGMOID_SQUARED_SLOPE: f64 = 8.0 / 27.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogisticLoss {
    /// `log(1 + exp(-z))`, convex.
    Logistic,
    /// `(1 - sigmoid(z))²`, bounded and nonconvex.
    SigmoidSquared,
}

/// Binary classification loss averaged over rows, `z_i = y_i a_iᵀ x`.
#[derive(Clone, Debug)]
pub struct NoisyLogistic {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    loss: LogisticLoss,
    domain: FeasibleSet,
    x0: ParamVector,
    metadata: OracleMetadata,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus_neg(z: f64) -> f64 {
    // log(1 + exp(-z))
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticLoss {
    fn value(self, z: f64) -> f64 {
        match self {
            LogisticLoss::Logistic => softplus_neg(z),
            LogisticLoss::SigmoidSquared => {
                let r = 1.0 - sigmoid(z);
                r * r
            }
        }
    }

    fn slope(self, z: f64) -> f64 {
        match self {
            LogisticLoss::Logistic => -sigmoid(-z),
            LogisticLoss::SigmoidSquared => {
                let s = sigmoid(z);
                let r = sigmoid(-z);
                -2.0 * s * r * r
            }
        }
    }

    fn max_slope(self) -> f64 {
        match self {
            LogisticLoss::Logistic => 1.0,
            LogisticLoss::SigmoidSquared => SIGMOID_SQUARED_SLOPE,
        }
    }

    fn max_curvature(self) -> f64 {
        match self {
            LogisticLoss::Logistic => 0.25,
            LogisticLoss::SigmoidSquared => SIGMOID_SQUARED_CURVATURE,
        }
    }
}

impl NoisyLogistic {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        loss: LogisticLoss,
        domain: FeasibleSet,
        x0: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::invalid("features", "at least one row required"));
        }
        check_dim(n, labels.len())?;
        let d = features[0].len();
        if d == 0 {
            return Err(Error::invalid("features", "dimension must be positive"));
        }
        for row in &features {
            check_dim(d, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("features", "entries must be finite"));
            }
        }
        if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
            return Err(Error::invalid("labels", "labels must be +1 or -1"));
        }
        domain.validate()?;
        domain.check_compatible(d)?;
        let x0 = match x0 {
            Some(v) => {
                check_dim(d, v.len())?;
                ParamVector::new(v)?
            }
            None => euclidean_project(&ParamVector::zeros(d), &domain)?,
        };

        let sq_norms: Vec<f64> = features
            .iter()
            .map(|r| r.iter().map(|a| a * a).sum())
            .collect();
        let max_sq = sq_norms.iter().copied().fold(0.0, f64::max);
        let mean_sq = sq_norms.iter().sum::<f64>() / n as f64;
        // Var ≤ E‖∇f_i‖² ≤ sup|φ'|² E‖a_i‖², uniformly in x
        let metadata = OracleMetadata {
            smoothness: (max_sq > 0.0).then_some(loss.max_curvature() * max_sq),
            noise_sigma: Some(loss.max_slope() * mean_sq.sqrt()),
            f_star_lower_bound: Some(0.0),
        };
        Ok(Self {
            features,
            labels,
            loss,
            domain,
            x0,
            metadata,
        })
    }

    /// Gaussian features and labels from a planted separator, with each label
    /// flipped independently with probability `label_noise`.
    #[allow(clippy::too_many_arguments)]
    pub fn synthetic(
        dim: usize,
        rows: usize,
        data_seed: u64,
        feature_scale: f64,
        label_noise: f64,
        loss: LogisticLoss,
        domain: FeasibleSet,
        x0: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 || rows == 0 {
            return Err(Error::invalid("dim/components", "must be positive"));
        }
        if !(feature_scale.is_finite() && feature_scale >= 0.0) {
            return Err(Error::invalid("feature_scale", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&label_noise) {
            return Err(Error::invalid("label_noise", "must lie in [0, 1]"));
        }
        let mut rng = SeededRng::new(data_seed);
        let planted: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let mut features = Vec::with_capacity(rows);
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            let a: Vec<f64> = (0..dim)
                .map(|_| feature_scale * rng.standard_normal())
                .collect();
            let margin: f64 = a.iter().zip(&planted).map(|(a, w)| a * w).sum();
            let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
            if rng.uniform(0.0, 1.0) < label_noise {
                y = -y;
            }
            features.push(a);
            labels.push(y);
        }
        Self::new(features, labels, loss, domain, x0)
    }

    pub fn loss(&self) -> LogisticLoss {
        self.loss
    }

    fn margin(&self, i: usize, x: &ParamVector) -> f64 {
        self.labels[i] * self.features[i].iter().zip(x.iter()).map(|(a, x)| a * x).sum::<f64>()
    }

    fn row_grad_into(&self, i: usize, x: &ParamVector, weight: f64, out: &mut [f64]) {
        let coef = weight * self.loss.slope(self.margin(i, x)) * self.labels[i];
        for (o, a) in out.iter_mut().zip(&self.features[i]) {
            *o += coef * a;
        }
    }
}

impl StochasticOracle for NoisyLogistic {
    fn dim(&self) -> usize {
        self.features[0].len()
    }

    fn components(&self) -> Components {
        Components::Finite(self.features.len() as u64)
    }

    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector {
        let mut out = vec![0.0; self.dim()];
        self.row_grad_into(xi.0 as usize, x, 1.0, &mut out);
        ParamVector::from_vec_unchecked(out)
    }

    fn full_grad(&self, x: &ParamVector) -> ParamVector {
        let n = self.features.len();
        let mut out = vec![0.0; self.dim()];
        for i in 0..n {
            self.row_grad_into(i, x, 1.0, &mut out);
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        ParamVector::from_vec_unchecked(out)
    }

    fn value(&self, x: &ParamVector) -> f64 {
        let n = self.features.len();
        (0..n).map(|i| self.loss.value(self.margin(i, x))).sum::<f64>() / n as f64
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
