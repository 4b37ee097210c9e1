use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::gradient::{batch_gradient, features};
use crate::circuits::{GradientMethod, QnnModel};
use crate::datasets::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub seed: u64,
    /// Fraction of every batch drawn from the adversarial set.
    #[serde(default)]
    pub adversarial_mix: f64,
    #[serde(default)]
    pub gradient: GradientMethod,
    /// Initial parameters are drawn from `U(-init_scale, init_scale)`.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_init_scale() -> f64 {
    std::f64::consts::PI
}

impl TrainConfig {
    /// `lr = 0.1`, batch 100.
    pub fn emnist(seed: u64) -> Self {
        Self {
            batch_size: 100,
            epochs: 30,
            lr: 0.1,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            seed,
            adversarial_mix: 0.0,
            gradient: GradientMethod::default(),
            init_scale: default_init_scale(),
        }
    }

    /// `lr = 0.03`, batch 50.
    pub fn lcei(seed: u64) -> Self {
        Self {
            batch_size: 50,
            epochs: 50,
            lr: 0.03,
            ..Self::emnist(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.adversarial_mix) {
            return Err(Error::Invalid(format!(
                "adversarial_mix {} outside [0, 1]",
                self.adversarial_mix
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// `(legitimate, adversarial)` samples per batch.
    pub fn batch_composition(&self) -> (usize, usize) {
        let adv = (self.adversarial_mix * self.batch_size as f64).floor() as usize;
        let adv = adv.min(self.batch_size - 1);
        (self.batch_size - adv, adv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub adversarial_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState<T> {
    pub epochs_done: usize,
    pub theta: Vec<T>,
    pub adam: AdamState<T>,
    pub best_theta: Vec<T>,
    pub best_epoch: Option<usize>,
    pub best_key: Option<(f64, f64)>,
    pub history: TrainHistory,
}

impl<T: Real> TrainState<T> {
    pub fn fresh(model: &QnnModel, cfg: &TrainConfig) -> Self {
        let theta = init_params(model.num_params(), cfg);
        Self::from_theta(theta, cfg)
    }

    pub fn from_theta(theta: Vec<T>, cfg: &TrainConfig) -> Self {
        let adam = AdamState::new(
            theta.len(),
            T::of(cfg.lr),
            T::of(cfg.beta1),
            T::of(cfg.beta2),
            T::of(cfg.eps),
        );
        Self {
            epochs_done: 0,
            best_theta: theta.clone(),
            theta,
            adam,
            best_epoch: None,
            best_key: None,
            history: TrainHistory::default(),
        }
    }
}

pub fn init_params<T: Real>(dim: usize, cfg: &TrainConfig) -> Vec<T> {
    let mut rng = substream(cfg.seed, Stream::Init, 0);
    (0..dim)
        .map(|_| T::of(rng.gen_range(-cfg.init_scale..=cfg.init_scale)))
        .collect()
}

/// Accuracy and mean loss of `theta` on `data`.
pub fn evaluate<T: Real>(model: &QnnModel, theta: &[T], data: &[Sample]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let preds: Vec<(bool, f64)> = data
        .par_iter()
        .map(|s| {
            let p = model.predict(theta, &features::<T>(s))?;
            Ok((
                p.is_correct(s.label),
                crate::circuits::cross_entropy(p.p, s.label).as_f64(),
            ))
        })
        .collect::<Result<_>>()?;
    let n = data.len() as f64;
    let correct = preds.iter().filter(|p| p.0).count() as f64;
    let loss = preds.iter().map(|p| p.1).sum::<f64>() / n;
    Ok((correct / n, loss))
}

pub struct TrainOutcome<T> {
    pub theta: Vec<T>,
    pub state: TrainState<T>,
}

impl<T> TrainOutcome<T> {
    pub fn history(&self) -> &TrainHistory {
        &self.state.history
    }
}

/// Runs epochs `state.epochs_done..cfg.epochs`. Batches take
/// `batch_composition().0` legitimate samples (a seeded shuffle without
/// replacement per epoch) plus `.1` adversarial ones cycled from `adv`.
pub fn run_epochs<T: Real>(
    model: &QnnModel,
    train: &Dataset,
    test: &Dataset,
    adv: Option<&Dataset>,
    cfg: &TrainConfig,
    mut state: TrainState<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let (legit_per_batch, adv_per_batch) = cfg.batch_composition();
    let adv_samples: &[Sample] = match adv {
        Some(d) if adv_per_batch > 0 => {
            if d.is_empty() {
                return Err(Error::Invalid("adversarial set is empty".into()));
            }
            &d.samples
        }
        _ => &[],
    };
    let adv_per_batch = if adv_samples.is_empty() {
        0
    } else {
        adv_per_batch
    };
    let legit_per_batch = if adv_per_batch == 0 {
        cfg.batch_size
    } else {
        legit_per_batch
    };

    for epoch in state.epochs_done..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut substream(cfg.seed, Stream::Batch, epoch as u64));
        let mut adv_order: Vec<usize> = (0..adv_samples.len()).collect();
        adv_order.shuffle(&mut substream(
            cfg.seed,
            Stream::Batch,
            (1 << 32) | epoch as u64,
        ));
        let mut adv_cursor = 0usize;

        let mut losses = Vec::with_capacity(train.len());
        for chunk in order.chunks(legit_per_batch) {
            let mut batch: Vec<&Sample> = chunk.iter().map(|&i| &train.samples[i]).collect();
            for _ in 0..adv_per_batch {
                batch.push(&adv_samples[adv_order[adv_cursor % adv_order.len()]]);
                adv_cursor += 1;
            }
            let (grad, batch_losses) = batch_gradient(model, &state.theta, &batch, cfg.gradient)?;
            losses.extend(batch_losses.into_iter().map(|l| l.as_f64()));
            state.adam.step(&mut state.theta, &grad)?;
        }
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if !loss.is_finite() || state.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        let (train_accuracy, _) = evaluate(model, &state.theta, &train.samples)?;
        let (test_accuracy, test_loss) = evaluate(model, &state.theta, &test.samples)?;
        let adversarial_accuracy = match adv {
            Some(d) if adv_per_batch > 0 => Some(evaluate(model, &state.theta, &d.samples)?.0),
            _ => None,
        };
        log::debug!(
            "epoch {epoch}: loss {loss:.4} train {train_accuracy:.3} test {test_accuracy:.3}"
        );
        // Best checkpoint: highest test accuracy, then lowest test loss.
        let better = match state.best_key {
            None => true,
            Some((acc, l)) => test_accuracy > acc || (test_accuracy == acc && test_loss < l),
        };
        if better {
            state.best_key = Some((test_accuracy, test_loss));
            state.best_epoch = Some(epoch);
            state.best_theta = state.theta.clone();
        }
        state.history.epochs.push(EpochRecord {
            epoch,
            loss,
            train_accuracy,
            test_accuracy,
            test_loss,
            adversarial_accuracy,
        });
        state.epochs_done = epoch + 1;
    }
    Ok(TrainOutcome {
        theta: state.best_theta.clone(),
        state,
    })
}

/// Mini-batch Adam on legitimate samples only.
pub fn train_clean<T: Real>(
    model: &QnnModel,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let clean = TrainConfig {
        adversarial_mix: 0.0,
        ..cfg.clone()
    };
    run_epochs(
        model,
        train,
        test,
        None,
        &clean,
        TrainState::fresh(model, &clean),
    )
}

/// Mixed-batch training. `init` warm-starts from given parameters
/// (typically the clean optimum); otherwise parameters are freshly drawn.
pub fn train_adversarial<T: Real>(
    model: &QnnModel,
    train: &Dataset,
    test: &Dataset,
    adv: &Dataset,
    cfg: &TrainConfig,
    init: Option<Vec<T>>,
) -> Result<TrainOutcome<T>> {
    if adv.is_empty() {
        return Err(Error::Invalid("adversarial set is empty".into()));
    }
    let state = match init {
        Some(theta) => TrainState::from_theta(theta, cfg),
        None => TrainState::fresh(model, cfg),
    };
    run_epochs(model, train, test, Some(adv), cfg, state)
}
