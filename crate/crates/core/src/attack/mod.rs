//! Input gradients, gradient-sparsity masks and the masked FGSM attack.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{GradientMethod, QnnModel};
use crate::datasets::{Dataset, DatasetPair, Sample, Split};
use crate::error::{check_len, Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Real;
use crate::simulator::infidelity;

/// Gradient of the sample loss with respect to the input features.
///
/// `ParameterShift` evaluates shifted circuits only for slots carrying a
/// feature selected by `mask` (all features when `None`); `Adjoint` returns
/// every component from one reverse sweep.
pub fn input_gradient<T: Real>(
    model: &QnnModel,
    theta: &[T],
    sample: &Sample,
    mask: Option<&Mask>,
    method: GradientMethod,
) -> Result<Vec<f64>> {
    let x: Vec<T> = sample.features.iter().map(|&v| T::of(v)).collect();
    let g = match method {
        GradientMethod::ParameterShift => {
            let all = vec![true; model.num_features()];
            let bits = mask.map_or(&all[..], |m| &m.bits[..]);
            model.masked_input_gradient(theta, &x, sample.label, bits)?
        }
        GradientMethod::Adjoint => model.loss_gradient(theta, &x, sample.label, method)?,
    };
    Ok(g.d_x.iter().map(|v| v.as_f64()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub bits: Vec<bool>,
    /// Requested fraction of features.
    pub fraction: f64,
}

impl Mask {
    pub fn all(dim: usize) -> Self {
        Self {
            bits: vec![true; dim],
            fraction: 1.0,
        }
    }

    pub fn from_indices(dim: usize, indices: &[usize], fraction: f64) -> Result<Self> {
        let mut bits = vec![false; dim];
        for &i in indices {
            if i >= dim {
                return Err(Error::Invalid(format!(
                    "mask index {i} outside {dim} features"
                )));
            }
            bits[i] = true;
        }
        Ok(Self { bits, fraction })
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }
}

/// Fraction of the total gradient l1 mass captured by the top `k` features,
/// for `k = 0..=dim` (`r = k / dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCurve {
    pub r: Vec<f64>,
    pub ratio: Vec<f64>,
}

impl GCurve {
    /// `G_r / G` with the top `ceil(r * dim)` features.
    pub fn at(&self, r: f64) -> f64 {
        let dim = self.r.len() - 1;
        let k = top_count(r, dim);
        self.ratio[k]
    }
}

fn top_count(r: f64, dim: usize) -> usize {
    // Guard against 0.15 * 100 = 15.000000000000002.
    (((r * dim as f64) - 1e-9).ceil().max(0.0) as usize).min(dim)
}

/// Averages gradient magnitudes over `gradients`, ranks features (ties by
/// index) and keeps the top `ceil(r * dim)`.
pub fn build_mask(gradients: &[Vec<f64>], r: f64) -> Result<(Mask, GCurve)> {
    let first = gradients
        .first()
        .ok_or_else(|| Error::Invalid("mask construction needs at least one gradient".into()))?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Invalid(format!("mask fraction {r} outside (0, 1]")));
    }
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for g in gradients {
        check_len("gradient sample", dim, g.len())?;
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v.abs();
        }
    }
    mean.iter_mut().for_each(|m| *m /= gradients.len() as f64);
    let total: f64 = mean.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(format!(
            "all {} averaged gradient components are zero; the model is insensitive to its inputs",
            dim
        )));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    let mut ratio = Vec::with_capacity(dim + 1);
    let mut acc = 0.0;
    ratio.push(0.0);
    for &i in &order {
        acc += mean[i];
        ratio.push(acc / total);
    }
    ratio[dim] = 1.0;
    let curve = GCurve {
        r: (0..=dim).map(|k| k as f64 / dim as f64).collect(),
        ratio,
    };
    let mask = Mask::from_indices(dim, &order[..top_count(r, dim)], r)?;
    Ok((mask, curve))
}

/// Mean-gradient mask from the first `count` samples of `samples`.
pub fn mask_from_samples<T: Real>(
    model: &QnnModel,
    theta: &[T],
    samples: &[Sample],
    count: usize,
    r: f64,
) -> Result<(Mask, GCurve)> {
    let grads: Vec<Vec<f64>> = samples
        .par_iter()
        .take(count)
        .map(|s| input_gradient(model, theta, s, None, GradientMethod::Adjoint))
        .collect::<Result<_>>()?;
    build_mask(&grads, r)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Masked gradient sign: entries in `{-1, 0, 1}`.
pub fn fgsm_direction(mask: &Mask, gradient: &[f64]) -> Result<Vec<f64>> {
    check_len("gradient", mask.dim(), gradient.len())?;
    Ok(mask
        .bits
        .iter()
        .zip(gradient)
        .map(|(&m, &g)| if m { sign(g) } else { 0.0 })
        .collect())
}

/// `x + eps * direction`.
pub fn perturb(x: &[f64], direction: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_len("direction", x.len(), direction.len())?;
    Ok(x.iter()
        .zip(direction)
        .map(|(a, d)| a + epsilon * d)
        .collect())
}

/// FGSM directions of `samples` against `theta`, fixed thereafter as the
/// target perturbations of an experiment.
pub fn target_directions<T: Real>(
    model: &QnnModel,
    theta: &[T],
    samples: &[Sample],
    mask: &Mask,
    gradient: GradientMethod,
) -> Result<Vec<Vec<f64>>> {
    samples
        .par_iter()
        .map(|s| {
            fgsm_direction(
                mask,
                &input_gradient(model, theta, s, Some(mask), gradient)?,
            )
        })
        .collect()
}

/// `x'_i = x_i + eps * sign(g_i)` where the mask is set. No clipping.
pub fn mask_fgsm(x: &[f64], mask: &Mask, epsilon: f64, gradient: &[f64]) -> Result<Vec<f64>> {
    check_len("mask", x.len(), mask.dim())?;
    check_len("gradient", x.len(), gradient.len())?;
    if !(epsilon >= 0.0) {
        return Err(Error::Invalid(format!(
            "epsilon {epsilon} must be nonnegative"
        )));
    }
    Ok(x.iter()
        .zip(&mask.bits)
        .zip(gradient)
        .map(|((&xi, &m), &g)| if m { xi + epsilon * sign(g) } else { xi })
        .collect())
}

/// Central `round(0.4 n)` qubits.
pub fn lcei_mask_default(n: usize) -> Mask {
    let count = ((0.4 * n as f64).round() as usize).clamp(1, n.max(1));
    let start = (n - count.min(n)) / 2;
    let idx: Vec<usize> = (start..start + count).collect();
    Mask::from_indices(n, &idx, 0.4).expect("indices in range")
}

/// `points` values uniformly spaced on `[0, max]`.
pub fn eps_grid(max: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| max * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn default_eps_grid() -> Vec<f64> {
    eps_grid(1.0, 41)
}

/// Response of one sample to a single-gradient FGSM sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackCurve {
    pub sample_id: u64,
    pub label: u8,
    pub eps_hat: Vec<f64>,
    /// Correct-class probability.
    pub p: Vec<f64>,
    pub correct: Vec<bool>,
    /// Output-qubit infidelity against the clean state.
    pub infidelity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub eps_hat: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub curves: Vec<AttackCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Feature-range width; `eps = eps_hat * width`.
    pub width: f64,
    pub with_infidelity: bool,
    pub gradient: GradientMethod,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::Invalid("perturbation grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid(
            "perturbation grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Attack curve of a single sample; the gradient is taken once at the clean input.
pub fn attack_curve<T: Real>(
    model: &QnnModel,
    theta: &[T],
    sample: &Sample,
    mask: &Mask,
    grid: &[f64],
    opts: SweepOptions,
) -> Result<AttackCurve> {
    check_grid(grid)?;
    let grad = input_gradient(model, theta, sample, Some(mask), opts.gradient)?;
    let to_t = |v: &[f64]| v.iter().map(|&a| T::of(a)).collect::<Vec<T>>();
    let clean_rho = if opts.with_infidelity {
        Some(model.output_density(theta, &to_t(&sample.features))?)
    } else {
        None
    };
    let mut p = Vec::with_capacity(grid.len());
    let mut correct = Vec::with_capacity(grid.len());
    let mut inf = Vec::with_capacity(grid.len());
    for &e in grid {
        let x = to_t(&mask_fgsm(&sample.features, mask, e * opts.width, &grad)?);
        let state = model.state(theta, &x)?;
        let z = state.expectation_z(model.output_qubit)?;
        let pred = crate::circuits::Prediction::from_p((z + T::one()) / T::of(2.0));
        p.push(pred.prob_of(sample.label).as_f64());
        correct.push(pred.is_correct(sample.label));
        if let Some(rho) = &clean_rho {
            let sigma = state.reduced_density(model.output_qubit)?;
            inf.push(infidelity(rho, &sigma).as_f64());
        }
    }
    Ok(AttackCurve {
        sample_id: sample.id,
        label: sample.label,
        eps_hat: grid.to_vec(),
        p,
        correct,
        infidelity: clean_rho.map(|_| inf),
    })
}

pub fn attack_sweep<T: Real>(
    model: &QnnModel,
    theta: &[T],
    samples: &[Sample],
    mask: &Mask,
    grid: &[f64],
    opts: SweepOptions,
) -> Result<SweepResult> {
    check_grid(grid)?;
    let curves: Vec<AttackCurve> = samples
        .par_iter()
        .map(|s| attack_curve(model, theta, s, mask, grid, opts))
        .collect::<Result<_>>()?;
    let n = curves.len().max(1) as f64;
    let accuracy = (0..grid.len())
        .map(|k| curves.iter().filter(|c| c.correct[k]).count() as f64 / n)
        .collect();
    Ok(SweepResult {
        eps_hat: grid.to_vec(),
        accuracy,
        curves,
    })
}

/// Perturbed copies of `samples` along `directions` at strength
/// `eps_hat * width`, labels kept.
pub fn adversarial_set(
    samples: &[Sample],
    directions: &[Vec<f64>],
    eps_hat: f64,
    source: &Dataset,
) -> Result<Dataset> {
    check_len("direction set", samples.len(), directions.len())?;
    let eps = eps_hat * source.width();
    let adv: Vec<Sample> = samples
        .iter()
        .zip(directions)
        .map(|(s, d)| {
            Ok(Sample {
                id: s.id,
                features: perturb(&s.features, d, eps)?,
                label: s.label,
            })
        })
        .collect::<Result<_>>()?;
    Dataset::new(Split::Adversarial, adv, source.feature_range)
}

/// Up to `per_class` training samples of each label, drawn on the
/// attack-oracle stream. A class with fewer samples contributes all of them.
pub fn adversarial_sources(train: &Dataset, per_class: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(2 * per_class);
    for label in 0..2u8 {
        let mut pool: Vec<&Sample> = train.samples.iter().filter(|s| s.label == label).collect();
        if pool.is_empty() {
            return Err(Error::Invalid(format!(
                "no training samples of class {label}"
            )));
        }
        if pool.len() < per_class {
            log::warn!(
                "class {label}: {} of {per_class} adversarial sources available",
                pool.len()
            );
        }
        pool.shuffle(&mut substream(
            seed,
            Stream::AttackOracle,
            100 + u64::from(label),
        ));
        out.extend(pool.into_iter().take(per_class).cloned());
    }
    Ok(out)
}

/// The attack evaluation set: every test sample, topped up to `count` with
/// training samples drawn on the attack-oracle stream.
pub fn evaluation_samples(data: &DatasetPair, count: usize, seed: u64) -> Vec<Sample> {
    let mut out: Vec<Sample> = data.test.samples.iter().take(count).cloned().collect();
    if out.len() < count {
        let mut extra: Vec<&Sample> = data.train.samples.iter().collect();
        extra.shuffle(&mut substream(seed, Stream::AttackOracle, 0));
        out.extend(extra.into_iter().take(count - out.len()).cloned());
    }
    out
}
