//! The generalized projection subproblem
//!
//! ```text
//! x̃ = argmin_{x ∈ X} ⟨g, x⟩ + (1/2γ)(x - x_t)ᵀ H (x - x_t)
//! ```
//!
//! solved exactly for diagonal or scalar `H` over the whole space, a box, or
//! a Euclidean ball.

use crate::adaptive_matrix::AdaptiveMatrix;
use crate::error::{check_dim, Error, Result};
use crate::feasible::{euclidean_project, FeasibleSet};
use crate::vector::ParamVector;

/// Relative width at which the ball-multiplier bisection stops.
pub const BALL_BISECTION_TOL: f64 = 1e-12;
const BALL_BISECTION_MAX_ITERS: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorStepResult {
    pub x_tilde: ParamVector,
    /// `‖x̃ - x_t‖`
    pub step_norm: f64,
}

fn check_inputs(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    set: &FeasibleSet,
) -> Result<()> {
    let d = x.dim();
    check_dim(d, g.dim())?;
    check_dim(d, h.dim())?;
    set.check_compatible(d)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must be > 0")));
    }
    if !h.is_positive_definite() {
        return Err(Error::Contract(format!(
            "adaptive matrix not positive definite (min eigenvalue {})",
            h.smallest_eigenvalue()
        )));
    }
    Ok(())
}

pub fn mirror_step(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    set: &FeasibleSet,
) -> Result<MirrorStepResult> {
    check_inputs(x, g, h, gamma, set)?;
    // unconstrained minimizer x - γ H^{-1} g
    let free = ParamVector::from_vec_unchecked(
        x.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (xi, gi))| xi - gamma * gi / h.entry(i))
            .collect(),
    );
    let x_tilde = match (set, h) {
        (FeasibleSet::Unconstrained, _) => free,
        // separable objective: clamp each coordinate
        (FeasibleSet::Box { .. }, _) => euclidean_project(&free, set)?,
        // isotropic objective: Euclidean projection
        (FeasibleSet::Ball { .. }, AdaptiveMatrix::Scalar { .. }) => euclidean_project(&free, set)?,
        (FeasibleSet::Ball { center, radius }, AdaptiveMatrix::Diagonal(diag)) => {
            ball_diagonal(x, g, diag, gamma, center, *radius, &free)
        }
    };
    let step_norm = x_tilde.distance(x);
    Ok(MirrorStepResult { x_tilde, step_norm })
}

/// KKT solution for a diagonal metric on a ball. With multiplier `ν ≥ 0`,
/// `x(ν)_i - c_i = a_i / (h_i/γ + ν)` where `a_i = h_i (x_i - c_i)/γ - g_i`;
/// `‖x(ν) - c‖` decreases in `ν`, so bisection on `‖x(ν) - c‖ = r` is exact.
fn ball_diagonal(
    x: &ParamVector,
    g: &ParamVector,
    diag: &[f64],
    gamma: f64,
    center: &[f64],
    radius: f64,
    free: &ParamVector,
) -> ParamVector {
    let free_dist = free.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum::<f64>().sqrt();
    if free_dist <= radius {
        return free.clone();
    }
    let a: Vec<f64> = (0..x.dim())
        .map(|i| diag[i] * (x[i] - center[i]) / gamma - g[i])
        .collect();
    let dist = |nu: f64| -> f64 {
        a.iter()
            .zip(diag)
            .map(|(ai, hi)| {
                let z = ai / (hi / gamma + nu);
                z * z
            })
            .sum::<f64>()
            .sqrt()
    };
    let a_norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut lo = 0.0;
    // at ν = ‖a‖/r every term is below a_i/ν, so the distance is ≤ r
    let mut hi = a_norm / radius;
    for _ in 0..BALL_BISECTION_MAX_ITERS {
        if hi - lo <= BALL_BISECTION_TOL * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if dist(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let point = ParamVector::from_vec_unchecked(
        a.iter()
            .zip(diag)
            .zip(center)
            .map(|((ai, hi_), c)| c + ai / (hi_ / gamma + hi))
            .collect(),
    );
    // remove rounding excess beyond the radius
    let set = FeasibleSet::Ball {
        center: center.to_vec(),
        radius,
    };
    euclidean_project(&point, &set).unwrap_or(point)
}

/// `(1/γ)(x - x⁺)` where `x⁺` solves the subproblem with gradient `g`.
pub fn gradient_mapping_vector(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    set: &FeasibleSet,
) -> Result<ParamVector> {
    let step = mirror_step(x, g, h, gamma, set)?;
    Ok(x.sub(&step.x_tilde).scale(1.0 / gamma))
}

/// `‖G_X(x, g, γ)‖`
pub fn gradient_mapping(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    set: &FeasibleSet,
) -> Result<f64> {
    Ok(mirror_step(x, g, h, gamma, set)?.step_norm / gamma)
}

/// Subproblem objective `⟨g, z⟩ + (1/2γ)(z - x)ᵀ H (z - x)`.
pub fn subproblem_objective(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    z: &ParamVector,
) -> f64 {
    let dz = z.sub(x);
    g.dot(z) + h.quad_form(&dz) / (2.0 * gamma)
}

/// Projected-gradient fixed-point residual `‖z - P_X(z - ∇φ(z))‖` of the
/// subproblem objective `φ` at `z`; zero exactly at the minimizer.
pub fn optimality_residual(
    x: &ParamVector,
    g: &ParamVector,
    h: &AdaptiveMatrix,
    gamma: f64,
    set: &FeasibleSet,
    z: &ParamVector,
) -> Result<f64> {
    check_inputs(x, g, h, gamma, set)?;
    let grad = g.add(&h.apply(&z.sub(x)).scale(1.0 / gamma));
    let moved = euclidean_project(&z.sub(&grad), set)?;
    Ok(moved.distance(z))
}
