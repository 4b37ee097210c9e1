use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_cos2, CosSqFit};
use crate::attack::{attack_curve, AttackCurve, Mask, SweepOptions};
use crate::circuits::QnnModel;
use crate::datasets::Sample;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Real;
use crate::simulator::infidelity;

/// Fidelity-radius lower bound `0.5 (sqrt(p1) - sqrt(p2))^2`; `p1` is the
/// correct-class probability.
pub fn r_lb(p1: f64, p2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
        return Err(Error::Invalid(format!(
            "probabilities ({p1}, {p2}) outside [0, 1]"
        )));
    }
    if (p1 + p2 - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("p1 + p2 = {} is not 1", p1 + p2)));
    }
    if p1 < p2 {
        return Err(Error::Invalid(format!(
            "sample is misclassified (p1 = {p1} < p2 = {p2}); the bound is undefined"
        )));
    }
    Ok(0.5 * (p1.sqrt() - p2.sqrt()).powi(2))
}

/// Optimal fidelity `sqrt(1 - 0.5 (sqrt(p1) - sqrt(p2))^2)` at the decision threshold.
pub fn v_star(p1: f64, p2: f64) -> f64 {
    (1.0 - 0.5 * (p1.sqrt() - p2.sqrt()).powi(2)).sqrt()
}

/// First misclassification strength and the fitted infidelity there.
pub fn extract_r_ub(p_fit: &CosSqFit, d_fit: &CosSqFit, eps_max: f64) -> Result<(f64, f64)> {
    match p_fit.first_crossing(0.5) {
        Some(e) if e <= eps_max => Ok((e, d_fit.eval(e))),
        _ => Err(Error::NoCrossing { max: eps_max }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Ok,
    /// Clean prediction wrong: no lower bound.
    Misclassified,
    /// Fitted probability never reaches 0.5 in the sweep.
    NoCrossing,
    /// Fit failed, or the upper bound fell below the lower bound by more
    /// than the infidelity-fit error.
    FitFailed,
    /// Only the lower bound was computed.
    LowerOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub sample_id: u64,
    pub label: u8,
    pub p1: f64,
    pub p2: f64,
    pub r_lb: Option<f64>,
    pub p_fit: Option<CosSqFit>,
    pub d_fit: Option<CosSqFit>,
    pub eps_star: Option<f64>,
    pub r_ub: Option<f64>,
    pub status: BoundStatus,
}

impl BoundRecord {
    pub fn gap(&self) -> Option<f64> {
        Some(self.r_ub? - self.r_lb?)
    }

    /// Lower bound used for ranking and averaging; misclassified samples count as 0.
    pub fn r_lb_or_zero(&self) -> f64 {
        self.r_lb.unwrap_or(0.0)
    }
}

/// Bound record from a sweep curve recorded with infidelities.
pub fn bound_from_curve(curve: &AttackCurve) -> Result<BoundRecord> {
    let d = curve
        .infidelity
        .as_ref()
        .ok_or_else(|| Error::Invalid("bound extraction needs infidelity data".into()))?;
    let p1 = curve.p[0];
    let p2 = 1.0 - p1;
    let mut rec = BoundRecord {
        sample_id: curve.sample_id,
        label: curve.label,
        p1,
        p2,
        r_lb: None,
        p_fit: None,
        d_fit: None,
        eps_star: None,
        r_ub: None,
        status: BoundStatus::Misclassified,
    };
    if !curve.correct[0] {
        return Ok(rec);
    }
    rec.r_lb = Some(r_lb(p1, p2)?);
    let (Ok(pf), Ok(df)) = (
        fit_cos2(&curve.eps_hat, &curve.p),
        fit_cos2(&curve.eps_hat, d),
    ) else {
        rec.status = BoundStatus::FitFailed;
        return Ok(rec);
    };
    rec.p_fit = Some(pf);
    rec.d_fit = Some(df);
    let eps_max = *curve.eps_hat.last().unwrap_or(&0.0);
    match extract_r_ub(&pf, &df, eps_max) {
        Ok((e, ub)) => {
            rec.eps_star = Some(e);
            rec.r_ub = Some(ub);
            rec.status = if ub + df.rmse < rec.r_lb.unwrap_or(0.0) {
                BoundStatus::FitFailed
            } else {
                BoundStatus::Ok
            };
        }
        Err(_) => rec.status = BoundStatus::NoCrossing,
    }
    Ok(rec)
}

/// Lower bounds from the clean predictions alone, without attack sweeps.
pub fn lower_bound_records<T: Real>(
    model: &QnnModel,
    theta: &[T],
    samples: &[Sample],
) -> Result<Vec<BoundRecord>> {
    samples
        .par_iter()
        .map(|s| {
            let x: Vec<T> = s.features.iter().map(|&v| T::of(v)).collect();
            let p1 = model.predict(theta, &x)?.prob_of(s.label).as_f64();
            let correct = p1 > 0.5;
            Ok(BoundRecord {
                sample_id: s.id,
                label: s.label,
                p1,
                p2: 1.0 - p1,
                r_lb: if correct {
                    Some(r_lb(p1, 1.0 - p1)?)
                } else {
                    None
                },
                p_fit: None,
                d_fit: None,
                eps_star: None,
                r_ub: None,
                status: if correct {
                    BoundStatus::LowerOnly
                } else {
                    BoundStatus::Misclassified
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundOptions {
    /// The fit window ends at `window_factor` times the first coarse-grid
    /// strength that misclassifies, capped at the end of the coarse grid.
    pub window_factor: f64,
    /// Points in the fit window.
    pub points: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            window_factor: 1.5,
            points: 41,
        }
    }
}

/// Two-pass bound extraction: the coarse `grid` locates the first
/// misclassification, then `p` and `D` are resampled and fitted on
/// `[0, window_factor * eps_first]`.
pub fn bound_record<T: Real>(
    model: &QnnModel,
    theta: &[T],
    sample: &Sample,
    mask: &Mask,
    grid: &[f64],
    opts: SweepOptions,
    bound: BoundOptions,
) -> Result<BoundRecord> {
    let coarse = attack_curve(
        model,
        theta,
        sample,
        mask,
        grid,
        SweepOptions {
            with_infidelity: false,
            ..opts
        },
    )?;
    let fine_opts = SweepOptions {
        with_infidelity: true,
        ..opts
    };
    let first = coarse.correct.iter().position(|&c| !c);
    let end = match first {
        Some(0) | None => *grid.last().unwrap_or(&0.0),
        Some(k) => (bound.window_factor * grid[k]).min(*grid.last().unwrap_or(&0.0)),
    };
    if end <= 0.0 {
        return Err(Error::Invalid(
            "perturbation grid has no positive strength".into(),
        ));
    }
    let fine = crate::attack::eps_grid(end, bound.points.max(5));
    bound_from_curve(&attack_curve(model, theta, sample, mask, &fine, fine_opts)?)
}

pub fn bound_records<T: Real>(
    model: &QnnModel,
    theta: &[T],
    samples: &[Sample],
    mask: &Mask,
    grid: &[f64],
    opts: SweepOptions,
    bound: BoundOptions,
) -> Result<Vec<BoundRecord>> {
    samples
        .par_iter()
        .map(|s| bound_record(model, theta, s, mask, grid, opts, bound))
        .collect()
}

/// Lowest `round(fraction * n)` (at least one) records by lower bound,
/// ties broken by sample id. Misclassified records are not candidates.
pub fn critical_samples(records: &[BoundRecord], fraction: f64) -> Result<Vec<&BoundRecord>> {
    let mut pool: Vec<&BoundRecord> = records.iter().filter(|r| r.r_lb.is_some()).collect();
    if pool.is_empty() {
        return Err(Error::Invalid(
            "no correctly classified records to rank".into(),
        ));
    }
    let k = ((fraction * pool.len() as f64).round() as usize).clamp(1, pool.len());
    pool.sort_by(|a, b| {
        a.r_lb_or_zero()
            .total_cmp(&b.r_lb_or_zero())
            .then(a.sample_id.cmp(&b.sample_id))
    });
    pool.truncate(k);
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub sample_id: u64,
    pub r_lb: f64,
    pub trials: usize,
    /// Perturbations whose output infidelity stayed below `r_lb`.
    pub qualifying: usize,
    pub violations: usize,
}

/// Searches random input directions for a perturbation that stays inside
/// the fidelity radius yet flips the prediction.
///
/// Each trial draws a uniform direction, brackets the magnitude at which the
/// output infidelity reaches `R_LB` (doubling, then bisection) and tests the
/// largest qualifying magnitude found plus one uniformly inside it.
pub fn verify_lb_soundness<T: Real>(
    model: &QnnModel,
    theta: &[T],
    sample: &Sample,
    trials: usize,
    width: f64,
    seed: u64,
) -> Result<SoundnessReport> {
    let to_t = |v: &[f64]| v.iter().map(|&a| T::of(a)).collect::<Vec<T>>();
    let x0 = to_t(&sample.features);
    let clean = model.predict(theta, &x0)?;
    if !clean.is_correct(sample.label) {
        return Err(Error::Invalid(format!(
            "sample {} is misclassified",
            sample.id
        )));
    }
    let p1 = clean.prob_of(sample.label).as_f64();
    let bound = r_lb(p1, 1.0 - p1)?;
    let mut report = SoundnessReport {
        sample_id: sample.id,
        r_lb: bound,
        trials,
        qualifying: 0,
        violations: 0,
    };
    if bound <= 0.0 || trials == 0 {
        return Ok(report);
    }
    let rho = model.output_density(theta, &x0)?;
    let mut rng = substream(seed, Stream::AttackOracle, 1 + sample.id);
    let dim = sample.features.len();
    let eval = |dir: &[f64], m: f64| -> Result<(f64, bool)> {
        let x: Vec<f64> = sample
            .features
            .iter()
            .zip(dir)
            .map(|(a, d)| a + m * d)
            .collect();
        let state = model.state(theta, &to_t(&x))?;
        let sigma = state.reduced_density(model.output_qubit)?;
        let z = state.expectation_z(model.output_qubit)?;
        let pred = crate::circuits::Prediction::from_p((z + T::one()) / T::of(2.0));
        Ok((
            infidelity(&rho, &sigma).as_f64(),
            pred.label_hat == clean.label_hat,
        ))
    };
    for _ in 0..trials {
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|d| *d /= norm.max(1e-300));
        let (mut lo, mut hi) = (0.0, 1e-3 * width);
        let mut bracketed = false;
        for _ in 0..16 {
            if eval(&dir, hi)?.0 >= bound {
                bracketed = true;
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if bracketed {
            for _ in 0..24 {
                let mid = 0.5 * (lo + hi);
                if eval(&dir, mid)?.0 < bound {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let inner = lo * rng.gen::<f64>();
        for m in [lo, inner] {
            let (d, same) = eval(&dir, m)?;
            if d < bound {
                report.qualifying += 1;
                if !same {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}
