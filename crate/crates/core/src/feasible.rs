//! Feasible sets for the projection step: the whole space, an axis-aligned
//! box, or a Euclidean ball.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::ParamVector;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    #[default]
    Unconstrained,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = FeasibleSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::boxed(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = FeasibleSet::Ball { center, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FeasibleSet::Unconstrained => "unconstrained",
            FeasibleSet::Box { .. } => "box",
            FeasibleSet::Ball { .. } => "ball",
        }
    }

    /// Dimension the set is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::Unconstrained => None,
            FeasibleSet::Box { lower, .. } => Some(lower.len()),
            FeasibleSet::Ball { center, .. } => Some(center.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::Unconstrained => Ok(()),
            FeasibleSet::Box { lower, upper } => {
                check_dim(lower.len(), upper.len())?;
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() || l > u {
                        return Err(Error::invalid(
                            "box",
                            format!("lower[{i}] = {l} exceeds upper[{i}] = {u}"),
                        ));
                    }
                }
                Ok(())
            }
            FeasibleSet::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("ball", format!("radius {radius} must be > 0")));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("ball", "center must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn check_compatible(&self, dim: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_dim(dim, d),
            None => Ok(()),
        }
    }

    pub fn contains(&self, x: &ParamVector, tol: f64) -> bool {
        match self {
            FeasibleSet::Unconstrained => true,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Ball { center, radius } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                d <= radius + tol
            }
        }
    }

    /// Smallest axis-aligned box containing the set, `None` when unbounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            FeasibleSet::Unconstrained => None,
            FeasibleSet::Box { lower, upper } => {
                if lower.iter().chain(upper).all(|v| v.is_finite()) {
                    Some((lower.clone(), upper.clone()))
                } else {
                    None
                }
            }
            FeasibleSet::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
        }
    }
}

/// Closest point of `set` to `v` in the Euclidean norm.
pub fn euclidean_project(v: &ParamVector, set: &FeasibleSet) -> Result<ParamVector> {
    set.check_compatible(v.dim())?;
    Ok(match set {
        FeasibleSet::Unconstrained => v.clone(),
        FeasibleSet::Box { lower, upper } => ParamVector::from_vec_unchecked(
            v.iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| x.max(*l).min(*u))
                .collect(),
        ),
        FeasibleSet::Ball { center, radius } => {
            let dist = v
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt();
            if dist <= *radius {
                v.clone()
            } else {
                let s = radius / dist;
                ParamVector::from_vec_unchecked(
                    v.iter()
                        .zip(center)
                        .map(|(x, c)| c + (x - c) * s)
                        .collect(),
                )
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn box_clamps_coordinatewise() {
        let set = FeasibleSet::cube(2, 1.0).unwrap();
        let p = euclidean_project(&pv(&[2.0, -3.0]), &set).unwrap();
        assert_eq!(p.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn ball_interior_point_is_fixed() {
        let set = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = euclidean_project(&pv(&[0.0, 0.0]), &set).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn ball_exterior_point_matches_grid_search() {
        let set = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let v = pv(&[3.0, 4.0]);
        let p = euclidean_project(&v, &set).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);

        // brute-force minimizer of ||x - v|| over a 1e-3 grid of the disc
        let step = 1e-3;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let n = (1.0 / step) as i64;
        for i in -n..=n {
            for j in -n..=n {
                let (x, y) = (i as f64 * step, j as f64 * step);
                if x * x + y * y > 1.0 {
                    continue;
                }
                let d = (x - 3.0).powi(2) + (y - 4.0).powi(2);
                if d < best.0 {
                    best = (d, x, y);
                }
            }
        }
        assert!((best.1 - 0.6).abs() <= 2e-3 && (best.2 - 0.8).abs() <= 2e-3);
        assert!(((p[0] - 3.0).powi(2) + (p[1] - 4.0).powi(2)) <= best.0 + 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let set = FeasibleSet::cube(3, 1.0).unwrap();
        assert!(matches!(
            euclidean_project(&pv(&[0.0, 0.0]), &set),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn invalid_sets_are_rejected() {
        assert!(FeasibleSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::ball(vec![0.0], 0.0).is_err());
        assert!(FeasibleSet::ball(vec![0.0], -1.0).is_err());
    }

    fn arb_set() -> impl Strategy<Value = FeasibleSet> {
        prop_oneof![
            proptest::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 3).prop_map(|b| {
                FeasibleSet::Box {
                    lower: b.iter().map(|(l, _)| *l).collect(),
                    upper: b.iter().map(|(l, w)| l + w).collect(),
                }
            }),
            (proptest::collection::vec(-3.0f64..3.0, 3), 0.01f64..3.0)
                .prop_map(|(center, radius)| FeasibleSet::Ball { center, radius }),
            Just(FeasibleSet::Unconstrained),
        ]
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(set in arb_set(), v in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let v = ParamVector::new(v).unwrap();
            let once = euclidean_project(&v, &set).unwrap();
            let twice = euclidean_project(&once, &set).unwrap();
            prop_assert!(set.contains(&once, 1e-12));
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
