use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{input_gradient, perturb};
use crate::circuits::{GradientMethod, QnnModel};
use crate::datasets::Sample;
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// `S = (p_clean - p_adv) / eps_hat` for the correct class.
pub fn sensitivity(p_clean: f64, p_adv: f64, eps_hat: f64) -> Result<f64> {
    if !(eps_hat > 0.0) {
        return Err(Error::Invalid(format!(
            "sensitivity needs eps_hat > 0, got {eps_hat}"
        )));
    }
    Ok((p_clean - p_adv) / eps_hat)
}

/// Per-sample robustness `1 / (1 + e^S)`.
pub fn robustness_score(s: f64) -> f64 {
    // Evaluated as a logistic of -S to stay finite for large |S|.
    if s >= 0.0 {
        let e = (-s).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + s.exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvRobustness {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

pub fn adv_robustness(sensitivities: &[f64]) -> Result<AdvRobustness> {
    if sensitivities.is_empty() {
        return Err(Error::Invalid("robustness of an empty sample set".into()));
    }
    let per_sample: Vec<f64> = sensitivities.iter().map(|&s| robustness_score(s)).collect();
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(AdvRobustness { mean, per_sample })
}

/// Cosine of the angle between `a` and `b`; zero when either vanishes.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("cosine operand", a.len(), b.len())?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_len("correlation operand", xs.len(), ys.len())?;
    if xs.len() < 3 {
        return Err(Error::Invalid(format!(
            "correlation needs at least 3 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_len("slope operand", xs.len(), ys.len())?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate(
            "slope needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub sample_id: u64,
    pub eps_hat: f64,
    pub p_clean: f64,
    pub p_adv: f64,
    pub delta_p: f64,
    /// Point ratio at `eps_hat`.
    pub s: f64,
    /// Minus the least-squares slope of `p` over the fit window.
    pub s_slope: f64,
    /// Cosine between the perturbation and the model's full input gradient.
    pub cosine_sim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityProtocol {
    pub eps_hat: f64,
    /// Upper end of the linear-fit window `[0, slope_max]`.
    pub slope_max: f64,
    pub slope_points: usize,
}

impl Default for SensitivityProtocol {
    fn default() -> Self {
        Self {
            eps_hat: 0.1,
            slope_max: 0.3,
            slope_points: 7,
        }
    }
}

/// Sensitivity of each sample to its target perturbation `directions[i]`
/// (typically the FGSM direction against the clean model). `width` converts
/// normalized strengths to feature units.
pub fn sensitivity_records<T: Real>(
    model: &QnnModel,
    theta: &[T],
    samples: &[Sample],
    directions: &[Vec<f64>],
    width: f64,
    protocol: &SensitivityProtocol,
) -> Result<Vec<SensitivityRecord>> {
    check_len("direction set", samples.len(), directions.len())?;
    samples
        .par_iter()
        .zip(directions)
        .map(|(s, d)| {
            let grad = input_gradient(model, theta, s, None, GradientMethod::Adjoint)?;
            let prob = |x: &[f64]| -> Result<f64> {
                let x: Vec<T> = x.iter().map(|&v| T::of(v)).collect();
                Ok(model.predict(theta, &x)?.prob_of(s.label).as_f64())
            };
            sensitivity_record(s, d, &grad, width, protocol, prob)
        })
        .collect()
}

/// Record for one sample; `prob` maps an input to the correct-class probability.
pub(crate) fn sensitivity_record(
    sample: &Sample,
    direction: &[f64],
    grad: &[f64],
    width: f64,
    protocol: &SensitivityProtocol,
    prob: impl Fn(&[f64]) -> Result<f64>,
) -> Result<SensitivityRecord> {
    let at = |eps_hat: f64| prob(&perturb(&sample.features, direction, eps_hat * width)?);
    let p_clean = at(0.0)?;
    let p_adv = at(protocol.eps_hat)?;
    let pts = protocol.slope_points.max(2);
    let xs: Vec<f64> = (0..pts)
        .map(|i| protocol.slope_max * i as f64 / (pts - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&e| at(e)).collect::<Result<_>>()?;
    Ok(SensitivityRecord {
        sample_id: sample.id,
        eps_hat: protocol.eps_hat,
        p_clean,
        p_adv,
        delta_p: p_clean - p_adv,
        s: sensitivity(p_clean, p_adv, protocol.eps_hat)?,
        s_slope: -linear_slope(&xs, &ys)?,
        cosine_sim: cosine_similarity(direction, grad)?,
    })
}

/// Pearson correlation between point sensitivity and cosine similarity.
pub fn correlation_analysis(records: &[SensitivityRecord]) -> Result<f64> {
    let s: Vec<f64> = records.iter().map(|r| r.s).collect();
    let c: Vec<f64> = records.iter().map(|r| r.cosine_sim).collect();
    pearson(&s, &c)
}
