use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::simulator::DensityMatrix1Q;

/// Decoherence times and effective circuit duration, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    pub t1: f64,
    pub t2: f64,
    pub t: f64,
}

impl Default for NoiseParams {
    /// Median T1 = 19.57 us and T2 = 2.29 us over a 1 us circuit.
    fn default() -> Self {
        Self {
            t1: 19.57e-6,
            t2: 2.29e-6,
            t: 1e-6,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T1", self.t1), ("T2", self.t2), ("t", self.t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NotPhysical(format!("{name} = {v} must be positive")));
            }
        }
        if self.t2 > 2.0 * self.t1 {
            log::warn!("T2 = {} exceeds 2 T1 = {}", self.t2, 2.0 * self.t1);
        }
        Ok(())
    }

    /// Population decay `exp(-t/T1)`.
    pub fn population_factor(&self) -> f64 {
        (-self.t / self.t1).exp()
    }

    /// Coherence decay of amplitude damping followed by phase damping,
    /// `exp(-t/(2 T1)) * exp(-t/(2 T2))`.
    pub fn coherence_factor(&self) -> f64 {
        (-self.t / (2.0 * self.t1) - self.t / (2.0 * self.t2)).exp()
    }
}

/// Composite amplitude- and phase-damping channel.
pub fn apply_noise<T: Real>(
    rho: &DensityMatrix1Q<T>,
    params: &NoiseParams,
) -> Result<DensityMatrix1Q<T>> {
    params.validate()?;
    let g = T::of(params.population_factor());
    let c = T::of(params.coherence_factor());
    let [r00, r01, r10, r11] = rho.entries();
    DensityMatrix1Q::new(
        r00 + r11.scale(T::one() - g),
        r01.scale(c),
        r10.scale(c),
        r11.scale(g),
    )
}

/// `(dp, dp_noise)` with `dp = rho_00 - sigma_00` in the computational basis.
pub fn noise_delta_p<T: Real>(
    rho: &DensityMatrix1Q<T>,
    sigma: &DensityMatrix1Q<T>,
    params: &NoiseParams,
) -> Result<(T, T)> {
    let dp = rho.r00().re - sigma.r00().re;
    let noisy = apply_noise(rho, params)?.r00().re - apply_noise(sigma, params)?.r00().re;
    Ok((dp, noisy))
}

/// Split of the probability change for the projector onto `a|0> + b|1>`:
/// `dp = a_part + b_part`, `dp_noise = e^{-t/T1} a_part + c b_part` with `c`
/// the coherence factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisDeltaP<T> {
    pub a_part: T,
    pub b_part: T,
    pub dp: T,
    pub dp_noise: T,
}

pub fn basis_delta_p<T: Real>(
    rho: &DensityMatrix1Q<T>,
    sigma: &DensityMatrix1Q<T>,
    alpha: C<T>,
    beta: C<T>,
    params: &NoiseParams,
) -> Result<BasisDeltaP<T>> {
    params.validate()?;
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - T::one()).abs() > T::STATE_TOL {
        return Err(Error::Invalid(format!("basis vector norm {norm} is not 1")));
    }
    let d00 = rho.r00().re - sigma.r00().re;
    let d01 = rho.r01() - sigma.r01();
    let ab = alpha.conj() * beta;
    let a_part = d00 * (alpha.norm_sqr() - beta.norm_sqr());
    // <psi|D|psi> picks up conj(alpha) beta D_01 plus its conjugate.
    let b_part = T::of(2.0) * (d01.re * ab.re - d01.im * ab.im);
    let dp = a_part + b_part;
    let dp_noise =
        T::of(params.population_factor()) * a_part + T::of(params.coherence_factor()) * b_part;
    Ok(BasisDeltaP {
        a_part,
        b_part,
        dp,
        dp_noise,
    })
}

/// `<psi|rho|psi>` for `psi = alpha|0> + beta|1>`.
pub fn basis_probability<T: Real>(rho: &DensityMatrix1Q<T>, alpha: C<T>, beta: C<T>) -> T {
    let [r00, r01, r10, r11] = rho.entries();
    let v = alpha.conj() * (r00 * alpha + r01 * beta) + beta.conj() * (r10 * alpha + r11 * beta);
    v.re
}
