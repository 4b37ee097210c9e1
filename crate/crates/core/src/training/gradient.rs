use rayon::prelude::*;

use crate::circuits::{GradientMethod, LossGradient, QnnModel};
use crate::datasets::Sample;
use crate::error::Result;
use crate::scalar::Real;

pub(crate) fn features<T: Real>(sample: &Sample) -> Vec<T> {
    sample.features.iter().map(|&v| T::of(v)).collect()
}

/// Parameter-shift gradient of the sample loss with respect to `theta`
/// (two circuit runs per angle slot).
pub fn psr_gradient<T: Real>(model: &QnnModel, theta: &[T], sample: &Sample) -> Result<Vec<T>> {
    Ok(model
        .loss_gradient(
            theta,
            &features(sample),
            sample.label,
            GradientMethod::ParameterShift,
        )?
        .d_theta)
}

/// Mean loss gradient over `batch`. Per-sample work runs in parallel; the
/// reduction is sequential in batch order so the result does not depend on
/// the worker count.
pub fn batch_gradient<T: Real>(
    model: &QnnModel,
    theta: &[T],
    batch: &[&Sample],
    method: GradientMethod,
) -> Result<(Vec<T>, Vec<T>)> {
    let per_sample: Vec<LossGradient<T>> = batch
        .par_iter()
        .map(|s| model.loss_gradient(theta, &features(s), s.label, method))
        .collect::<Result<_>>()?;
    let mut grad = vec![T::zero(); theta.len()];
    let mut losses = Vec::with_capacity(batch.len());
    for g in &per_sample {
        for (acc, v) in grad.iter_mut().zip(&g.d_theta) {
            *acc += *v;
        }
        losses.push(g.loss);
    }
    let n = T::of(batch.len().max(1) as f64);
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((grad, losses))
}
