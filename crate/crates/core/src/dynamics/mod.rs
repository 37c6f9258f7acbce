//! Consensus dynamics `ẋ = −L(t)x + w(t)` on piecewise-constant schedules.
//!
//! Propagation inside a segment is exact: `exp(−L_k Δ)` comes from the
//! symmetric eigendecomposition of `L_k`. Only the noise convolution is
//! integrated numerically (composite Simpson).

mod noise;
mod propagate;
mod simulate;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::graph::GraphError;

pub use noise::{NoiseKind, NoisePiece, NoiseProcess};
pub use propagate::{
    projected_system, transition_matrix, OutputRoute, ProjectedSystem, Propagator, SystemKind,
    TransitionMatrix,
};
pub use simulate::{average_drift, simulate, simulate_with, SimulationOptions, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("noise energy {energy} on window starting at {window_start} exceeds B0 = {b0}")]
    NoiseEnergy { window_start: f64, energy: f64, b0: f64 },
}

/// Node states at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub time: f64,
    pub values: DVector<f64>,
}

impl StateVector {
    pub fn new(time: f64, values: DVector<f64>) -> Result<Self, DynamicsError> {
        if !time.is_finite() || time < 0.0 {
            return Err(DynamicsError::InvalidState(format!("initial time {time} must be >= 0")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::InvalidState("state has non-finite entries".into()));
        }
        Ok(Self { time, values })
    }

    pub fn at_zero(values: &[f64]) -> Self {
        Self::new(0.0, DVector::from_column_slice(values)).expect("finite initial state")
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }
}

/// Seeded state with entries uniform in `[−1, 1)`.
pub fn random_state(seed: u64, n: usize) -> DVector<f64> {
    let mut rng = Pcg64::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// `y = (I − 11ᵀ/N) x`.
pub fn project(x: &DVector<f64>) -> DVector<f64> {
    if x.is_empty() {
        return x.clone();
    }
    x.add_scalar(-x.mean())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_examples() {
        let c = DVector::from_element(4, 2.5);
        assert_eq!(project(&c), DVector::zeros(4));
        let a = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(project(&a), a);
        let b = DVector::from_vec(vec![3.0, 1.0, 2.0]);
        assert_eq!(project(&b), DVector::from_vec(vec![1.0, -1.0, 0.0]));
        let once = project(&DVector::from_vec(vec![0.1, 0.7, -2.3, 5.0]));
        assert!((project(&once) - &once).amax() < 1e-15);
    }

    #[test]
    fn state_vector_validation() {
        assert!(StateVector::new(-1.0, DVector::zeros(2)).is_err());
        assert!(StateVector::new(0.0, DVector::from_vec(vec![f64::NAN])).is_err());
    }
}
