//! Classical D-5-1 feedforward baseline with backprop, Adam training and FGSM.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{fgsm_direction, Mask};
use crate::datasets::{Dataset, Sample};
use crate::error::{check_len, Error, Result};
use crate::rng::{substream, Stream};
use crate::robustness::score::sensitivity_record;
use crate::robustness::{adv_robustness, NoiseParams, SensitivityProtocol, SensitivityRecord};
use crate::scalar::Real;
use crate::training::{AdamState, EpochRecord, TrainConfig, TrainHistory};

pub const HIDDEN: usize = 5;

/// `p = sigmoid(w2 . relu(W1 x + b1) + b2)`, the probability of class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnModel<T> {
    pub inputs: usize,
    /// Row-major `HIDDEN x inputs`.
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> FnnModel<T> {
    pub fn zeros(inputs: usize) -> Self {
        Self {
            inputs,
            w1: vec![T::zero(); HIDDEN * inputs],
            b1: vec![T::zero(); HIDDEN],
            w2: vec![T::zero(); HIDDEN],
            b2: T::zero(),
        }
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn init(inputs: usize, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::Init, 1);
        let mut draw = |fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            T::of(rng.gen_range(-a..=a))
        };
        let w1 = (0..HIDDEN * inputs).map(|_| draw(inputs)).collect();
        let b1 = (0..HIDDEN).map(|_| draw(inputs)).collect();
        let w2 = (0..HIDDEN).map(|_| draw(HIDDEN)).collect();
        let b2 = draw(HIDDEN);
        Self {
            inputs,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn num_params(&self) -> usize {
        HIDDEN * self.inputs + 2 * HIDDEN + 1
    }

    /// Flattened `[w1, b1, w2, b2]`.
    pub fn params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[T]) -> Result<()> {
        check_len("FNN parameter vector", self.num_params(), p.len())?;
        let n1 = HIDDEN * self.inputs;
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + HIDDEN]);
        self.w2.copy_from_slice(&p[n1 + HIDDEN..n1 + 2 * HIDDEN]);
        self.b2 = p[n1 + 2 * HIDDEN];
        Ok(())
    }

    fn hidden(&self, x: &[T]) -> Vec<T> {
        (0..HIDDEN)
            .map(|h| {
                let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                row.iter().zip(x).fold(self.b1[h], |a, (&w, &v)| a + w * v)
            })
            .collect()
    }

    pub fn forward(&self, x: &[T]) -> Result<T> {
        check_len("FNN input", self.inputs, x.len())?;
        let z = self
            .hidden(x)
            .iter()
            .zip(&self.w2)
            .fold(self.b2, |a, (&h, &w)| a + w * h.max(T::zero()));
        Ok(sigmoid(z))
    }

    /// Cross-entropy with the gradients with respect to parameters and input.
    pub fn backward(&self, x: &[T], label: u8) -> Result<(T, Vec<T>, Vec<T>)> {
        check_len("FNN input", self.inputs, x.len())?;
        let pre = self.hidden(x);
        let act: Vec<T> = pre.iter().map(|&v| v.max(T::zero())).collect();
        let z = act
            .iter()
            .zip(&self.w2)
            .fold(self.b2, |a, (&h, &w)| a + w * h);
        let p = sigmoid(z);
        let loss = crate::circuits::cross_entropy(p, label);
        // d(-y ln p - (1-y) ln(1-p)) / dz = p - y
        let dz = p - T::of(f64::from(label));
        let mut grad = vec![T::zero(); self.num_params()];
        let mut dx = vec![T::zero(); self.inputs];
        let n1 = HIDDEN * self.inputs;
        for h in 0..HIDDEN {
            grad[n1 + HIDDEN + h] = dz * act[h];
            if pre[h] > T::zero() {
                let dh = dz * self.w2[h];
                grad[n1 + h] = dh;
                for i in 0..self.inputs {
                    grad[h * self.inputs + i] = dh * x[i];
                    dx[i] += dh * self.w1[h * self.inputs + i];
                }
            }
        }
        grad[n1 + 2 * HIDDEN] = dz;
        Ok((loss, grad, dx))
    }

    pub fn predict_sample(&self, s: &Sample) -> Result<T> {
        self.forward(&to_t(&s.features))
    }
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::of(a)).collect()
}

/// Probability assigned to `label`.
fn prob_of<T: Real>(p: T, label: u8) -> T {
    if label == 1 {
        p
    } else {
        T::one() - p
    }
}

pub fn fnn_evaluate<T: Real>(model: &FnnModel<T>, data: &[Sample]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for s in data {
        let p = model.predict_sample(s)?;
        if prob_of(p, s.label) > T::of(0.5) {
            correct += 1;
        }
        loss += crate::circuits::cross_entropy(p, s.label).as_f64();
    }
    Ok((correct as f64 / data.len() as f64, loss / data.len() as f64))
}

/// Adam settings of the classical baseline: `lr = 0.01`, 10 epochs, batch 10.
pub fn fnn_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 10,
        epochs: 10,
        lr: 0.01,
        ..TrainConfig::emnist(seed)
    }
}

pub struct FnnOutcome<T> {
    pub model: FnnModel<T>,
    pub history: TrainHistory,
}

/// Mini-batch Adam with the same batch sampling and mixing rules as the
/// quantum trainer. `init` warm-starts from an existing network.
pub fn fnn_train<T: Real>(
    train: &Dataset,
    test: &Dataset,
    adv: Option<&Dataset>,
    cfg: &TrainConfig,
    init: Option<FnnModel<T>>,
) -> Result<FnnOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let mut model = init.unwrap_or_else(|| FnnModel::init(train.dim(), cfg.seed));
    check_len("FNN input", model.inputs, train.dim())?;
    let (mut legit, mut n_adv) = cfg.batch_composition();
    let adv_samples: &[Sample] = match adv {
        Some(d) if n_adv > 0 && !d.is_empty() => &d.samples,
        _ => &[],
    };
    if adv_samples.is_empty() {
        legit = cfg.batch_size;
        n_adv = 0;
    }
    let mut params = model.params();
    let mut adam = AdamState::new(
        params.len(),
        T::of(cfg.lr),
        T::of(cfg.beta1),
        T::of(cfg.beta2),
        T::of(cfg.eps),
    );
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut substream(cfg.seed, Stream::Batch, epoch as u64));
        let mut adv_order: Vec<usize> = (0..adv_samples.len()).collect();
        adv_order.shuffle(&mut substream(
            cfg.seed,
            Stream::Batch,
            (1 << 32) | epoch as u64,
        ));
        let mut cursor = 0usize;
        let mut losses = Vec::with_capacity(train.len());
        for chunk in order.chunks(legit) {
            let mut batch: Vec<&Sample> = chunk.iter().map(|&i| &train.samples[i]).collect();
            for _ in 0..n_adv {
                batch.push(&adv_samples[adv_order[cursor % adv_order.len()]]);
                cursor += 1;
            }
            let per: Vec<(T, Vec<T>)> = batch
                .par_iter()
                .map(|s| {
                    model
                        .backward(&to_t(&s.features), s.label)
                        .map(|(l, g, _)| (l, g))
                })
                .collect::<Result<_>>()?;
            let mut grad = vec![T::zero(); params.len()];
            for (l, g) in &per {
                losses.push(l.as_f64());
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += *b);
            }
            let n = T::of(batch.len() as f64);
            grad.iter_mut().for_each(|g| *g /= n);
            adam.step(&mut params, &grad)?;
            model.set_params(&params)?;
        }
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        let (train_accuracy, _) = fnn_evaluate(&model, &train.samples)?;
        let (test_accuracy, test_loss) = fnn_evaluate(&model, &test.samples)?;
        let adversarial_accuracy = match adv {
            Some(d) if n_adv > 0 => Some(fnn_evaluate(&model, &d.samples)?.0),
            _ => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            loss,
            train_accuracy,
            test_accuracy,
            test_loss,
            adversarial_accuracy,
        });
    }
    Ok(FnnOutcome { model, history })
}

pub fn fnn_input_gradient<T: Real>(model: &FnnModel<T>, s: &Sample) -> Result<Vec<f64>> {
    let (_, _, dx) = model.backward(&to_t(&s.features), s.label)?;
    Ok(dx.iter().map(|v| v.as_f64()).collect())
}

/// Full-input FGSM directions against `model`.
pub fn fnn_target_directions<T: Real>(
    model: &FnnModel<T>,
    samples: &[Sample],
) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| fgsm_direction(&Mask::all(s.features.len()), &fnn_input_gradient(model, s)?))
        .collect()
}

/// Sensitivity records along fixed target perturbations.
pub fn fnn_sensitivity_records<T: Real>(
    model: &FnnModel<T>,
    samples: &[Sample],
    directions: &[Vec<f64>],
    width: f64,
    protocol: &SensitivityProtocol,
) -> Result<Vec<SensitivityRecord>> {
    check_len("direction set", samples.len(), directions.len())?;
    samples
        .iter()
        .zip(directions)
        .map(|(s, d)| {
            let g = fnn_input_gradient(model, s)?;
            let prob = |x: &[f64]| -> Result<f64> {
                Ok(prob_of(model.forward(&to_t(x))?, s.label).as_f64())
            };
            sensitivity_record(s, d, &g, width, protocol, prob)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessComparison {
    pub qnn: f64,
    pub fnn: f64,
    /// `qnn / fnn`.
    pub ratio: f64,
    /// Quantum score with every `S` scaled by the readout-basis T1 factor.
    pub qnn_noisy: f64,
    pub noisy_ratio: f64,
    pub noise_factor: f64,
}

/// Ratio of mean robustness scores. Both record sets must cover the same
/// samples at the same perturbation strength.
pub fn fnn_robustness_compare(
    qnn: &[SensitivityRecord],
    fnn: &[SensitivityRecord],
    noise: &NoiseParams,
) -> Result<RobustnessComparison> {
    if qnn.len() != fnn.len()
        || qnn
            .iter()
            .zip(fnn)
            .any(|(a, b)| a.sample_id != b.sample_id || a.eps_hat != b.eps_hat)
    {
        return Err(Error::Invalid(
            "quantum and classical reports use different samples or strengths".into(),
        ));
    }
    noise.validate()?;
    let q: Vec<f64> = qnn.iter().map(|r| r.s).collect();
    let f: Vec<f64> = fnn.iter().map(|r| r.s).collect();
    let factor = noise.population_factor();
    let qn: Vec<f64> = q.iter().map(|s| s * factor).collect();
    let q = adv_robustness(&q)?.mean;
    let f = adv_robustness(&f)?.mean;
    let qn = adv_robustness(&qn)?.mean;
    Ok(RobustnessComparison {
        qnn: q,
        fnn: f,
        ratio: q / f,
        qnn_noisy: qn,
        noisy_ratio: qn / f,
        noise_factor: factor,
    })
}

#[cfg(test)]
mod tests;
