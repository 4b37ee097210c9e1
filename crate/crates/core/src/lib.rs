//! Statevector-backed benchmark for the adversarial robustness of
//! variational quantum classifiers: training, masked FGSM attacks,
//! sensitivity scores, fidelity robustness bounds, decoherence scaling and
//! readout unfolding, plus a small classical baseline.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the common choices.

pub mod error;
pub mod rng;
pub mod scalar;
pub mod simulator;

pub mod attack;
pub mod circuits;
pub mod datasets;
pub mod experiment;
pub mod fnn;
pub mod mitigation;
pub mod robustness;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StateVector64 = simulator::StateVector<f64>;
pub type StateVector32 = simulator::StateVector<f32>;
pub type Density64 = simulator::DensityMatrix1Q<f64>;
pub type Density32 = simulator::DensityMatrix1Q<f32>;
pub type TrainState64 = training::TrainState<f64>;
pub type TrainState32 = training::TrainState<f32>;
pub type Fnn64 = fnn::FnnModel<f64>;
pub type Fnn32 = fnn::FnnModel<f32>;
