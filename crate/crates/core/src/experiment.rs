//! Profiles and the shared attack protocol used by the CLI and the
//! acceptance suite.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attack::{
    adversarial_set, adversarial_sources, eps_grid, evaluation_samples, lcei_mask_default,
    mask_from_samples, target_directions, GCurve, Mask,
};
use crate::circuits::{build_emnist_model, build_lcei_model, GradientMethod, QnnModel, Task};
use crate::datasets::{gen_lcei, Dataset, DatasetPair, EmnistConfig, LceiConfig, Sample};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Real;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Profile {
    /// 20 qubits, 13x13 EMNIST window.
    #[serde(rename = "paper-20q")]
    Paper20q,
    /// 12 qubits, 10x10 EMNIST images.
    #[serde(rename = "desk-12q")]
    Desk12q,
}

impl Profile {
    pub fn num_qubits(self) -> usize {
        match self {
            Profile::Paper20q => 20,
            Profile::Desk12q => 12,
        }
    }

    /// Qubits per block, outermost first.
    pub fn blocks(self) -> Vec<usize> {
        match self {
            Profile::Paper20q => vec![20, 16, 12, 8, 4],
            Profile::Desk12q => vec![12, 10, 8, 6, 4],
        }
    }

    pub fn emnist(self) -> EmnistConfig {
        match self {
            Profile::Paper20q => EmnistConfig::paper(),
            Profile::Desk12q => EmnistConfig::desk(),
        }
    }

    pub fn lcei(self) -> LceiConfig {
        LceiConfig::new(self.num_qubits())
    }

    pub fn model(self, task: Task) -> Result<QnnModel> {
        match task {
            Task::Emnist => build_emnist_model(
                self.num_qubits(),
                &self.blocks(),
                self.emnist().num_features(),
            ),
            Task::Lcei => build_lcei_model(self.num_qubits(), &self.blocks()),
        }
    }

    pub fn train_config(self, task: Task, seed: u64) -> TrainConfig {
        match task {
            Task::Emnist => TrainConfig::emnist(seed),
            Task::Lcei => TrainConfig::lcei(seed),
        }
    }

    pub fn lcei_data(self, seed: u64) -> Result<DatasetPair> {
        gen_lcei(&self.lcei(), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackProtocol {
    /// Fraction of features the mask may touch.
    pub mask_fraction: f64,
    /// Training samples whose mean gradient ranks the features.
    pub mask_samples: usize,
    /// Use the central-qubit mask for LCEI instead of a gradient mask.
    pub lcei_central_mask: bool,
    pub eval_samples: usize,
    pub adversarial_per_class: usize,
    /// Normalized strength of the adversarial training set.
    pub eps_hat: f64,
    pub eps_max: f64,
    pub grid_points: usize,
    pub gradient: GradientMethod,
}

impl Default for AttackProtocol {
    fn default() -> Self {
        Self {
            mask_fraction: 0.15,
            mask_samples: 20,
            lcei_central_mask: true,
            eval_samples: 200,
            adversarial_per_class: 100,
            eps_hat: 0.1,
            eps_max: 1.0,
            grid_points: 41,
            gradient: GradientMethod::Adjoint,
        }
    }
}

impl AttackProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return Err(Error::Invalid(format!(
                "mask fraction {} outside (0, 1]",
                self.mask_fraction
            )));
        }
        if !(self.eps_hat >= 0.0 && self.eps_max > 0.0) || self.grid_points < 2 {
            return Err(Error::Invalid(
                "perturbation grid needs eps_max > 0 and 2+ points".into(),
            ));
        }
        if self.mask_samples == 0 || self.eval_samples == 0 {
            return Err(Error::Invalid(
                "mask and evaluation sample counts must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        eps_grid(self.eps_max, self.grid_points)
    }
}

/// Mask, evaluation samples and their target perturbations, all fixed
/// against one (clean) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTargets {
    pub mask: Mask,
    pub g_curve: Option<GCurve>,
    pub eval: Vec<Sample>,
    pub eval_directions: Vec<Vec<f64>>,
    pub sources: Vec<Sample>,
    pub source_directions: Vec<Vec<f64>>,
}

impl AttackTargets {
    /// The adversarial training set at `eps_hat`.
    pub fn adversarial(&self, eps_hat: f64, train: &Dataset) -> Result<Dataset> {
        adversarial_set(&self.sources, &self.source_directions, eps_hat, train)
    }
}

pub fn attack_mask<T: Real>(
    model: &QnnModel,
    theta: &[T],
    train: &Dataset,
    protocol: &AttackProtocol,
    seed: u64,
) -> Result<(Mask, Option<GCurve>)> {
    if model.task == Task::Lcei && protocol.lcei_central_mask {
        return Ok((lcei_mask_default(model.num_features()), None));
    }
    let mut pool = train.samples.clone();
    pool.shuffle(&mut substream(seed, Stream::AttackOracle, 2));
    let (mask, g) = mask_from_samples(
        model,
        theta,
        &pool,
        protocol.mask_samples,
        protocol.mask_fraction,
    )?;
    Ok((mask, Some(g)))
}

pub fn attack_targets<T: Real>(
    model: &QnnModel,
    theta: &[T],
    data: &DatasetPair,
    protocol: &AttackProtocol,
    seed: u64,
) -> Result<AttackTargets> {
    protocol.validate()?;
    let (mask, g_curve) = attack_mask(model, theta, &data.train, protocol, seed)?;
    let eval = evaluation_samples(data, protocol.eval_samples, seed);
    let sources = adversarial_sources(&data.train, protocol.adversarial_per_class, seed)?;
    let eval_directions = target_directions(model, theta, &eval, &mask, protocol.gradient)?;
    let source_directions = target_directions(model, theta, &sources, &mask, protocol.gradient)?;
    Ok(AttackTargets {
        mask,
        g_curve,
        eval,
        eval_directions,
        sources,
        source_directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_match_their_datasets() {
        for p in [Profile::Desk12q, Profile::Paper20q] {
            let m = p.model(Task::Emnist).unwrap();
            assert_eq!(m.num_features(), p.emnist().num_features());
            assert_eq!(p.model(Task::Lcei).unwrap().num_features(), p.num_qubits());
        }
        assert_eq!(Profile::Desk12q.emnist().num_features(), 100);
        assert_eq!(Profile::Paper20q.emnist().num_features(), 169);
        assert_eq!(
            serde_json::to_string(&Profile::Desk12q).unwrap(),
            "\"desk-12q\""
        );
    }

    #[test]
    fn default_protocol_is_valid() {
        let p = AttackProtocol::default();
        p.validate().unwrap();
        assert_eq!(p.mask_fraction, 0.15);
        assert_eq!(p.grid().len(), 41);
        let bad = AttackProtocol {
            mask_fraction: 0.0,
            ..p
        };
        assert!(bad.validate().is_err());
    }
}
