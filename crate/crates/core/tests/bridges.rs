//! Special cases of the framework reproduce known optimizers, and the
//! convergence measure dominates the gradient mapping.

use proptest::prelude::*;

use superadam::adaptive_matrix::{AdaptiveMatrix, MatrixCase, MatrixConfig};
use superadam::baselines::Adam;
use superadam::estimator::{Schedule, Tau};
use superadam::feasible::FeasibleSet;
use superadam::metrics::measure_mt;
use superadam::mirror_step::{gradient_mapping, mirror_step};
use superadam::oracle::StochasticOracle;
use superadam::problems::FiniteSumQuadratic;
use superadam::rng::{stream, SeededRng};
use superadam::superadam::{SuperAdam, SuperAdamConfig};
use superadam::vector::ParamVector;

/// Momentum estimator, case 1 matrix, shared samples and a flat schedule is
/// Adam without bias correction, with `m_1 = g_1`, `η = μγ`, `ε = λ`,
/// `β₁ = 1 - α`.
#[test]
fn momentum_case1_with_flat_schedule_is_adam() {
    let d = 5;
    let p = FiniteSumQuadratic::random(d, 20, 61, 0.2, 2.0, 1.0, FeasibleSet::Unconstrained, None).unwrap();
    // μ_t = k/√(m+t) varies by under 1e-10 relative over the run.
    let (k, m) = (1e5, 1e12_f64);
    let mu0 = k / m.sqrt();
    let alpha = 0.1;
    let (gamma, lambda, beta) = (0.5, 1e-3, 0.99);
    let schedule = Schedule::new(Tau::Momentum, k, m, alpha / mu0, gamma).unwrap();
    let t_max = 300;
    let mut cfg = SuperAdamConfig::new(schedule, MatrixConfig::new(MatrixCase::Case1 { beta }, lambda), t_max, 21);
    cfg.reuse_estimator_sample = true;
    let mut sa = SuperAdam::new(&p, &cfg).unwrap();

    let mut adam = Adam::new(d, mu0 * gamma, 1.0 - alpha, beta, lambda);
    adam.decreasing = false;
    adam.bias_correction = false;
    adam.first_moment_from_gradient = true;
    let mut rng = SeededRng::substream(21, stream::ESTIMATOR);
    let mut x = p.initial_point();
    let mut worst = 0.0f64;
    for _ in 0..t_max {
        let xi = p.sample(&mut rng);
        let g = p.stoch_grad(&x, xi);
        x = adam.step(&x, &g).unwrap();
        let info = sa.step().unwrap();
        let rel = info.x_next.distance(&x) / (1.0 + x.norm());
        worst = worst.max(rel);
    }
    assert!(worst < 1e-8, "trajectories drift apart: {worst:e}");
    assert!(x.distance(&p.initial_point()) > 0.1, "iterate barely moved");
    assert_eq!(sa.calls().matrix, 0);
}

/// With `α = 1` the momentum estimator is the plain stochastic gradient, and
/// with `μ = 1` and `H = I` the step is projected SGD.
#[test]
fn full_weight_momentum_is_projected_sgd() {
    let d = 4;
    let set = FeasibleSet::cube(d, 1.0).unwrap();
    let p = FiniteSumQuadratic::random(d, 10, 62, 0.5, 2.0, 2.0, set.clone(), None).unwrap();
    let gamma = 0.3;
    // μ_t = 1e6/√(1e12 + t) ≈ 1 and α = min(10μ, 1) = 1.
    let schedule = Schedule::with_cap(Tau::Momentum, 1e6, 1e12, 10.0, gamma, 1.0).unwrap();
    let mut cfg = SuperAdamConfig::new(schedule, MatrixConfig::new(MatrixCase::Case1 { beta: 0.9 }, 1.0), 50, 5);
    cfg.feasible_set = Some(set.clone());
    let mut sa = SuperAdam::new(&p, &cfg).unwrap();
    let mut rng = SeededRng::substream(5, stream::ESTIMATOR);
    let identity = AdaptiveMatrix::scalar(1.0, d);
    for _ in 0..50 {
        let xi = p.sample(&mut rng);
        let info = sa.step().unwrap();
        assert_eq!(info.alpha, 1.0);
        let expected = p.stoch_grad(&info.x, xi);
        assert!(info.g.distance(&expected) <= 1e-12 * (1.0 + expected.norm()));
        let sgd = superadam::feasible::euclidean_project(&info.x.sub(&info.g.scale(gamma)), &set).unwrap();
        let step = mirror_step(&info.x, &info.g, &identity, gamma, &set).unwrap();
        assert!(step.x_tilde.distance(&sgd) < 1e-12);
    }
}

fn arb_case() -> impl Strategy<Value = (ParamVector, ParamVector, ParamVector, AdaptiveMatrix, f64, FeasibleSet)> {
    (1usize..6).prop_flat_map(|d| {
        (
            prop::collection::vec(-2.0f64..2.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(0.01f64..20.0, d),
            any::<bool>(),
            0.01f64..3.0,
            0.2f64..3.0,
            any::<bool>(),
        )
            .prop_map(move |(x, full, g, diag, scalar, gamma, r, ball)| {
                let set = if ball {
                    FeasibleSet::ball(vec![0.0; d], r).unwrap()
                } else {
                    FeasibleSet::cube(d, r).unwrap()
                };
                let x = superadam::feasible::euclidean_project(&ParamVector::new(x).unwrap(), &set).unwrap();
                let h = if scalar {
                    AdaptiveMatrix::scalar(diag[0], d)
                } else {
                    AdaptiveMatrix::Diagonal(diag)
                };
                (x, ParamVector::new(full).unwrap(), ParamVector::new(g).unwrap(), h, gamma, set)
            })
    })
}

proptest! {
    /// `‖G_X(x, ∇f, γ)‖ ≤ (1/ρ)‖∇f - g‖ + (1/γ)‖x̃ - x‖` whenever `H ⪰ ρI`.
    #[test]
    fn measure_dominates_gradient_mapping((x, full, g, h, gamma, set) in arb_case()) {
        let rho = h.smallest_eigenvalue();
        let step = mirror_step(&x, &g, &h, gamma, &set).unwrap();
        let mt = measure_mt(&full, &g, &x, &step.x_tilde, rho, gamma).unwrap();
        let gm = gradient_mapping(&x, &full, &h, gamma, &set).unwrap();
        prop_assert!(gm <= mt * (1.0 + 1e-10) + 1e-12, "G = {gm} > M = {mt}");
    }

    /// A smaller floor only loosens the measure.
    #[test]
    fn measure_is_monotone_in_the_floor((x, full, g, h, gamma, set) in arb_case(), shrink in 0.01f64..1.0) {
        let rho = h.smallest_eigenvalue();
        let step = mirror_step(&x, &g, &h, gamma, &set).unwrap();
        let a = measure_mt(&full, &g, &x, &step.x_tilde, rho, gamma).unwrap();
        let b = measure_mt(&full, &g, &x, &step.x_tilde, rho * shrink, gamma).unwrap();
        prop_assert!(b >= a);
    }
}
