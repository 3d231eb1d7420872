//! Synthetic stochastic test problems with known constants.

mod logistic;
mod quadratic;
mod rosenbrock;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use logistic::{LogisticLoss, NoisyLogistic, SIGMOID_SQUARED_CURVATURE, SIGMOID_SQUARED_SLOPE};
pub use quadratic::FiniteSumQuadratic;
pub use rosenbrock::StochasticRosenbrock;

use crate::error::Result;
use crate::feasible::FeasibleSet;
use crate::oracle::StochasticOracle;

fn one() -> f64 {
    1.0
}

fn default_label_noise() -> f64 {
    0.1
}

/// Serializable problem description, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Explicit diagonal curvatures `Q_i` and linear terms `c_i`, one row per component.
    FiniteSumQuadratic {
        curvatures: Vec<Vec<f64>>,
        linear: Vec<Vec<f64>>,
        #[serde(default)]
        domain: FeasibleSet,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    RandomQuadratic {
        dim: usize,
        components: usize,
        data_seed: u64,
        #[serde(default = "RandomQuadraticDefaults::curvature_min")]
        curvature_min: f64,
        #[serde(default = "RandomQuadraticDefaults::curvature_max")]
        curvature_max: f64,
        #[serde(default = "one")]
        linear_scale: f64,
        #[serde(default)]
        domain: FeasibleSet,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    NoisyLogistic {
        dim: usize,
        components: usize,
        data_seed: u64,
        #[serde(default = "one")]
        feature_scale: f64,
        #[serde(default = "default_label_noise")]
        label_noise: f64,
        #[serde(default)]
        nonconvex: bool,
        #[serde(default)]
        domain: FeasibleSet,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    LogisticData {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        #[serde(default)]
        nonconvex: bool,
        #[serde(default)]
        domain: FeasibleSet,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    StochasticRosenbrock {
        dim: usize,
        noise_sigma: f64,
        #[serde(default)]
        domain: FeasibleSet,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
}

struct RandomQuadraticDefaults;

impl RandomQuadraticDefaults {
    fn curvature_min() -> f64 {
        0.1
    }
    fn curvature_max() -> f64 {
        1.0
    }
}

impl ProblemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::FiniteSumQuadratic { .. } => "finite_sum_quadratic",
            ProblemSpec::RandomQuadratic { .. } => "random_quadratic",
            ProblemSpec::NoisyLogistic { .. } => "noisy_logistic",
            ProblemSpec::LogisticData { .. } => "logistic_data",
            ProblemSpec::StochasticRosenbrock { .. } => "stochastic_rosenbrock",
        }
    }
}

fn loss_of(nonconvex: bool) -> LogisticLoss {
    if nonconvex {
        LogisticLoss::SigmoidSquared
    } else {
        LogisticLoss::Logistic
    }
}

pub fn make_problem(spec: &ProblemSpec) -> Result<Arc<dyn StochasticOracle>> {
    let spec = spec.clone();
    Ok(match spec {
        ProblemSpec::FiniteSumQuadratic {
            curvatures,
            linear,
            domain,
            x0,
        } => Arc::new(FiniteSumQuadratic::new(curvatures, linear, domain, x0)?),
        ProblemSpec::RandomQuadratic {
            dim,
            components,
            data_seed,
            curvature_min,
            curvature_max,
            linear_scale,
            domain,
            x0,
        } => Arc::new(FiniteSumQuadratic::random(
            dim,
            components,
            data_seed,
            curvature_min,
            curvature_max,
            linear_scale,
            domain,
            x0,
        )?),
        ProblemSpec::NoisyLogistic {
            dim,
            components,
            data_seed,
            feature_scale,
            label_noise,
            nonconvex,
            domain,
            x0,
        } => Arc::new(NoisyLogistic::synthetic(
            dim,
            components,
            data_seed,
            feature_scale,
            label_noise,
            loss_of(nonconvex),
            domain,
            x0,
        )?),
        ProblemSpec::LogisticData {
            features,
            labels,
            nonconvex,
            domain,
            x0,
        } => Arc::new(NoisyLogistic::new(features, labels, loss_of(nonconvex), domain, x0)?),
        ProblemSpec::StochasticRosenbrock {
            dim,
            noise_sigma,
            domain,
            x0,
        } => Arc::new(StochasticRosenbrock::new(dim, noise_sigma, domain, x0)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_roundtrip_and_defaults() {
        let json = r#"{"kind":"random_quadratic","dim":4,"components":8,"data_seed":5,
                       "domain":{"kind":"box","lower":[-1,-1,-1,-1],"upper":[1,1,1,1]}}"#;
        let spec: ProblemSpec = serde_json::from_str(json).unwrap();
        let p = make_problem(&spec).unwrap();
        assert_eq!(p.dim(), 4);
        let back: ProblemSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"kind":"stochastic_rosenbrock","dim":2,"noise_sigma":0.1,"bogus":1}"#;
        assert!(serde_json::from_str::<ProblemSpec>(json).is_err());
    }
}
