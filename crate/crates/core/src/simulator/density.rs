use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Validated single-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix1Q<T> {
    r00: C<T>,
    r01: C<T>,
    r10: C<T>,
    r11: C<T>,
}

impl<T: Real> DensityMatrix1Q<T> {
    /// Checks Hermiticity, unit trace and positivity. Eigenvalues within
    /// tolerance below zero are clipped and the trace renormalized.
    pub fn new(r00: C<T>, r01: C<T>, r10: C<T>, r11: C<T>) -> Result<Self> {
        let tol = T::STATE_TOL;
        let herm_err = (r01 - r10.conj())
            .norm()
            .max(r00.im.abs())
            .max(r11.im.abs());
        if herm_err > tol {
            return Err(Error::NotPhysical(format!(
                "not Hermitian (error {herm_err})"
            )));
        }
        let trace = r00.re + r11.re;
        if (trace - T::one()).abs() > tol {
            return Err(Error::NotPhysical(format!("trace = {trace}")));
        }
        let a = r00.re / trace;
        let d = r11.re / trace;
        let off = (r01 + r10.conj()).unscale(T::of(2.0) * trace);
        let z = a - d;
        let radius = (z * z + T::of(4.0) * off.norm_sqr()).sqrt();
        let min_eig = (T::one() - radius) / T::of(2.0);
        if min_eig < -tol {
            return Err(Error::NotPhysical(format!("negative eigenvalue {min_eig}")));
        }
        let (a, d, off) = if radius > T::one() {
            // Clip the negative eigenvalue: the Bloch vector shrinks to unit length.
            let k = T::one() / radius;
            let half = T::of(0.5);
            (half + half * z * k, half - half * z * k, off.scale(k))
        } else {
            (a, d, off)
        };
        Ok(Self {
            r00: C::new(a, T::zero()),
            r01: off,
            r10: off.conj(),
            r11: C::new(d, T::zero()),
        })
    }

    /// `|psi><psi|` for `psi = a0|0> + a1|1>` (normalized internally).
    pub fn from_pure(a0: C<T>, a1: C<T>) -> Result<Self> {
        let n = a0.norm_sqr() + a1.norm_sqr();
        if n <= T::zero() {
            return Err(Error::Invalid("zero vector".into()));
        }
        let (a0, a1) = (a0.unscale(n.sqrt()), a1.unscale(n.sqrt()));
        Self::new(
            C::new(a0.norm_sqr(), T::zero()),
            a0 * a1.conj(),
            a1 * a0.conj(),
            C::new(a1.norm_sqr(), T::zero()),
        )
    }

    pub fn from_bloch(x: T, y: T, z: T) -> Result<Self> {
        let half = T::of(0.5);
        Self::new(
            C::new(half * (T::one() + z), T::zero()),
            C::new(half * x, -half * y),
            C::new(half * x, half * y),
            C::new(half * (T::one() - z), T::zero()),
        )
    }

    pub fn r00(&self) -> C<T> {
        self.r00
    }
    pub fn r01(&self) -> C<T> {
        self.r01
    }
    pub fn r10(&self) -> C<T> {
        self.r10
    }
    pub fn r11(&self) -> C<T> {
        self.r11
    }

    pub fn entries(&self) -> [C<T>; 4] {
        [self.r00, self.r01, self.r10, self.r11]
    }

    pub fn prob0(&self) -> T {
        self.r00.re
    }

    pub fn prob1(&self) -> T {
        self.r11.re
    }

    pub fn trace(&self) -> T {
        self.r00.re + self.r11.re
    }

    pub fn det(&self) -> T {
        (self.r00 * self.r11 - self.r01 * self.r10).re
    }

    pub fn bloch(&self) -> [T; 3] {
        let two = T::of(2.0);
        [
            two * self.r01.re,
            -two * self.r01.im,
            self.r00.re - self.r11.re,
        ]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [T; 2] {
        let [x, y, z] = self.bloch();
        let r = (x * x + y * y + z * z).sqrt();
        let half = T::of(0.5);
        [half * (T::one() - r), half * (T::one() + r)]
    }

    /// Uhlmann fidelity via the 2x2 closed form `Tr(rho sigma) + 2 sqrt(det rho det sigma)`.
    pub fn fidelity(&self, other: &Self) -> T {
        let overlap = (self.r00 * other.r00
            + self.r01 * other.r10
            + self.r10 * other.r01
            + self.r11 * other.r11)
            .re;
        let dets = (self.det().max(T::zero()) * other.det().max(T::zero())).sqrt();
        (overlap + T::of(2.0) * dets).max(T::zero()).min(T::one())
    }

    pub fn infidelity(&self, other: &Self) -> T {
        T::one() - self.fidelity(other)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub(crate) fn from_raw(r00: C<T>, r01: C<T>, r10: C<T>, r11: C<T>) -> Self {
        Self { r00, r01, r10, r11 }
    }
}

/// Free-function form of [`DensityMatrix1Q::fidelity`].
pub fn fidelity<T: Real>(rho: &DensityMatrix1Q<T>, sigma: &DensityMatrix1Q<T>) -> T {
    rho.fidelity(sigma)
}

pub fn infidelity<T: Real>(rho: &DensityMatrix1Q<T>, sigma: &DensityMatrix1Q<T>) -> T {
    rho.infidelity(sigma)
}

impl<T: Real> Default for DensityMatrix1Q<T> {
    fn default() -> Self {
        Self::from_raw(C::new(T::one(), T::zero()), C::zero(), C::zero(), C::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn orthogonal_and_identical() {
        let zero = DensityMatrix1Q::<f64>::from_bloch(0.0, 0.0, 1.0).unwrap();
        let one = DensityMatrix1Q::<f64>::from_bloch(0.0, 0.0, -1.0).unwrap();
        assert!(zero.fidelity(&one).abs() < 1e-15);
        let mixed = DensityMatrix1Q::<f64>::from_bloch(0.2, -0.3, 0.1).unwrap();
        assert!((mixed.fidelity(&mixed) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unphysical() {
        assert!(DensityMatrix1Q::new(c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)).is_err());
        assert!(DensityMatrix1Q::new(c(0.7, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.7, 0.0)).is_err());
        assert!(DensityMatrix1Q::new(c(1.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.2, 0.0)).is_err());
    }

    #[test]
    fn clips_rounding_negativity() {
        // Bloch length 1 + 1e-12: inside tolerance, gets projected to a pure state.
        let r = 1.0 + 1e-12;
        let rho = DensityMatrix1Q::new(c(0.5, 0.0), c(0.5 * r, 0.0), c(0.5 * r, 0.0), c(0.5, 0.0))
            .unwrap();
        let [lo, hi] = rho.eigenvalues();
        assert!(lo >= -1e-15 && (hi - 1.0).abs() < 1e-12);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_states_fidelity() {
        let half = DensityMatrix1Q::<f64>::from_bloch(0.0, 0.0, 0.0).unwrap();
        let zero = DensityMatrix1Q::<f64>::from_bloch(0.0, 0.0, 1.0).unwrap();
        assert!((half.fidelity(&zero) - 0.5).abs() < 1e-15);
    }
}
