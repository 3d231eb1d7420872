//! Adaptive-gradient stochastic optimization with a variance-reduced or
//! momentum gradient estimator, a pluggable adaptive matrix and a mirror step
//! over a feasible set, together with reference optimizers, test problems,
//! convergence measures and an experiment harness.

pub mod adaptive_matrix;
pub mod baselines;
pub mod error;
pub mod estimator;
pub mod feasible;
pub mod harness;
pub mod metrics;
pub mod mirror_step;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod superadam;
pub mod vector;

pub use adaptive_matrix::{AdaptiveMatrix, MatrixCase, MatrixConfig, MatrixGenerator};
pub use error::{Error, Result};
pub use estimator::{EstimatorState, Schedule, Tau};
pub use feasible::{euclidean_project, FeasibleSet};
pub use mirror_step::{mirror_step, MirrorStepResult};
pub use oracle::{OracleMetadata, Sample, StochasticOracle};
pub use rng::SeededRng;
pub use superadam::{run, run_from, OutputMode, SuperAdam, SuperAdamConfig, Trajectory};
pub use vector::ParamVector;
