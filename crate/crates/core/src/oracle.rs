//! Stochastic first-order oracle interface.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::feasible::FeasibleSet;
use crate::rng::SeededRng;
use crate::vector::ParamVector;

/// Identifier of one random example `ξ`. For finite sums it is the component
/// index; for infinite families it keys the noise draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Components {
    Finite(u64),
    Infinite,
}

/// Known problem constants. `None` means unknown; checks that need a value
/// refuse to run instead of guessing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleMetadata {
    /// Smoothness constant of each component function (hence of `f`).
    pub smoothness: Option<f64>,
    /// Uniform bound on the stochastic gradient standard deviation.
    pub noise_sigma: Option<f64>,
    /// Lower bound on `inf_{x in X} f(x)`.
    pub f_star_lower_bound: Option<f64>,
}

pub trait StochasticOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn components(&self) -> Components;

    /// Draw one example. Finite sums sample uniformly over component indices.
    fn sample(&self, rng: &mut SeededRng) -> Sample {
        match self.components() {
            Components::Finite(n) => Sample(rng.index(n)),
            Components::Infinite => Sample(rng.next_u64()),
        }
    }

    /// Gradient of the component `f(x; ξ)`; deterministic in `(x, ξ)`.
    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector;

    fn full_grad(&self, x: &ParamVector) -> ParamVector;

    fn value(&self, x: &ParamVector) -> f64;

    fn metadata(&self) -> OracleMetadata {
        OracleMetadata::default()
    }

    /// Domain over which the metadata constants hold.
    fn domain(&self) -> FeasibleSet {
        FeasibleSet::Unconstrained
    }

    fn initial_point(&self) -> ParamVector {
        ParamVector::zeros(self.dim())
    }
}

impl<T: StochasticOracle + ?Sized> StochasticOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn components(&self) -> Components {
        (**self).components()
    }
    fn sample(&self, rng: &mut SeededRng) -> Sample {
        (**self).sample(rng)
    }
    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector {
        (**self).stoch_grad(x, xi)
    }
    fn full_grad(&self, x: &ParamVector) -> ParamVector {
        (**self).full_grad(x)
    }
    fn value(&self, x: &ParamVector) -> f64 {
        (**self).value(x)
    }
    fn metadata(&self) -> OracleMetadata {
        (**self).metadata()
    }
    fn domain(&self) -> FeasibleSet {
        (**self).domain()
    }
    fn initial_point(&self) -> ParamVector {
        (**self).initial_point()
    }
}

impl<T: StochasticOracle + ?Sized> StochasticOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn components(&self) -> Components {
        (**self).components()
    }
    fn sample(&self, rng: &mut SeededRng) -> Sample {
        (**self).sample(rng)
    }
    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector {
        (**self).stoch_grad(x, xi)
    }
    fn full_grad(&self, x: &ParamVector) -> ParamVector {
        (**self).full_grad(x)
    }
    fn value(&self, x: &ParamVector) -> f64 {
        (**self).value(x)
    }
    fn metadata(&self) -> OracleMetadata {
        (**self).metadata()
    }
    fn domain(&self) -> FeasibleSet {
        (**self).domain()
    }
    fn initial_point(&self) -> ParamVector {
        (**self).initial_point()
    }
}

/// Wraps an oracle and counts calls to each entry point.
pub struct CountingOracle<O> {
    inner: O,
    stoch_grads: AtomicU64,
    full_grads: AtomicU64,
    values: AtomicU64,
}

impl<O: StochasticOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            stoch_grads: AtomicU64::new(0),
            full_grads: AtomicU64::new(0),
            values: AtomicU64::new(0),
        }
    }

    pub fn stoch_grad_calls(&self) -> u64 {
        self.stoch_grads.load(Ordering::Relaxed)
    }

    pub fn full_grad_calls(&self) -> u64 {
        self.full_grads.load(Ordering::Relaxed)
    }

    pub fn value_calls(&self) -> u64 {
        self.values.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.stoch_grads.store(0, Ordering::Relaxed);
        self.full_grads.store(0, Ordering::Relaxed);
        self.values.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: StochasticOracle> StochasticOracle for CountingOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn components(&self) -> Components {
        self.inner.components()
    }
    fn sample(&self, rng: &mut SeededRng) -> Sample {
        self.inner.sample(rng)
    }
    fn stoch_grad(&self, x: &ParamVector, xi: Sample) -> ParamVector {
        self.stoch_grads.fetch_add(1, Ordering::Relaxed);
        self.inner.stoch_grad(x, xi)
    }
    fn full_grad(&self, x: &ParamVector) -> ParamVector {
        self.full_grads.fetch_add(1, Ordering::Relaxed);
        self.inner.full_grad(x)
    }
    fn value(&self, x: &ParamVector) -> f64 {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }
    fn metadata(&self) -> OracleMetadata {
        self.inner.metadata()
    }
    fn domain(&self) -> FeasibleSet {
        self.inner.domain()
    }
    fn initial_point(&self) -> ParamVector {
        self.inner.initial_point()
    }
}

/// Mean of `stoch_grad(x, ξ)` over every component index of a finite sum.
pub fn enumerate_mean_grad(oracle: &dyn StochasticOracle, x: &ParamVector) -> Option<ParamVector> {
    let Components::Finite(n) = oracle.components() else {
        return None;
    };
    let mut acc = ParamVector::zeros(oracle.dim());
    for i in 0..n {
        acc.axpy(1.0, &oracle.stoch_grad(x, Sample(i)));
    }
    Some(acc.scale(1.0 / n as f64))
}

/// Exact `E ||∇f(x;ξ) - ∇f(x)||^2` for a finite sum, by enumeration.
pub fn enumerate_grad_variance(oracle: &dyn StochasticOracle, x: &ParamVector) -> Option<f64> {
    let Components::Finite(n) = oracle.components() else {
        return None;
    };
    let full = oracle.full_grad(x);
    let total: f64 = (0..n)
        .map(|i| oracle.stoch_grad(x, Sample(i)).sub(&full).norm_sq())
        .sum();
    Some(total / n as f64)
}
