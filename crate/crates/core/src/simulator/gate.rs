use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, Real, C};

/// Row-major 2x2 complex matrix `[m00, m01, m10, m11]`.
pub type Mat2<T> = [C<T>; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Gate<T> {
    Rx {
        qubit: usize,
        angle: T,
    },
    Rz {
        qubit: usize,
        angle: T,
    },
    /// `Rz(phi) · Rx(theta) · Rz(lambda)`, i.e. the hardware sequence
    /// `Rz(phi - pi/2) Rx(pi/2) Rz(pi - theta) Rx(pi/2) Rz(lambda - pi/2)`
    /// with the global phase dropped.
    Su2 {
        qubit: usize,
        theta: T,
        phi: T,
        lambda: T,
    },
    Cz {
        control: usize,
        target: usize,
    },
}

pub fn rx<T: Real>(angle: T) -> Mat2<T> {
    let half = angle / T::of(2.0);
    let (s, c) = half.sin_cos();
    let z = T::zero();
    [C::new(c, z), C::new(z, -s), C::new(z, -s), C::new(c, z)]
}

pub fn rz<T: Real>(angle: T) -> Mat2<T> {
    let half = angle / T::of(2.0);
    let z = C::zero();
    [cis(-half), z, z, cis(half)]
}

pub fn su2<T: Real>(theta: T, phi: T, lambda: T) -> Mat2<T> {
    let two = T::of(2.0);
    let (s, c) = (theta / two).sin_cos();
    let minus_i = C::new(T::zero(), -T::one());
    let sum = (phi + lambda) / two;
    let diff = (lambda - phi) / two;
    [
        cis(-sum).scale(c),
        minus_i * cis(diff).scale(s),
        minus_i * cis(-diff).scale(s),
        cis(sum).scale(c),
    ]
}

pub fn matmul<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

pub fn adjoint<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    [m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()]
}

pub fn identity<T: Real>() -> Mat2<T> {
    [C::one(), C::zero(), C::zero(), C::one()]
}

impl<T: Real> Gate<T> {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Rx { qubit, .. } | Gate::Rz { qubit, .. } | Gate::Su2 { qubit, .. } => {
                (qubit, None)
            }
            Gate::Cz { control, target } => (control, Some(target)),
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
        }
        if b == Some(a) {
            return Err(Error::DegenerateCz(a));
        }
        Ok(())
    }

    /// Unitary of a single-qubit gate; `None` for CZ.
    pub fn matrix(&self) -> Option<Mat2<T>> {
        match *self {
            Gate::Rx { angle, .. } => Some(rx(angle)),
            Gate::Rz { angle, .. } => Some(rz(angle)),
            Gate::Su2 {
                theta, phi, lambda, ..
            } => Some(su2(theta, phi, lambda)),
            Gate::Cz { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn max_diff(a: &Mat2<f64>, b: &Mat2<f64>) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn hardware_sequence(theta: f64, phi: f64, lambda: f64) -> Mat2<f64> {
        let seq = [
            rz(phi - FRAC_PI_2),
            rx(FRAC_PI_2),
            rz(PI - theta),
            rx(FRAC_PI_2),
            rz(lambda - FRAC_PI_2),
        ];
        seq.iter().fold(identity(), |acc, m| matmul(&acc, m))
    }

    /// Equality up to a global phase.
    fn phase_equal(a: &Mat2<f64>, b: &Mat2<f64>) -> f64 {
        let k = (0..4)
            .max_by(|&i, &j| a[i].norm().total_cmp(&a[j].norm()))
            .unwrap();
        let phase = b[k] / a[k];
        let aligned: Mat2<f64> = [a[0] * phase, a[1] * phase, a[2] * phase, a[3] * phase];
        max_diff(&aligned, b)
    }

    #[test]
    fn su2_matches_hardware_decomposition() {
        let mut state = 12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 * PI - 2.0 * PI
        };
        for _ in 0..100 {
            let (t, p, l) = (next(), next(), next());
            let err = phase_equal(&su2(t, p, l), &hardware_sequence(t, p, l));
            assert!(err < 1e-12, "err {err}");
            let zxz = matmul(&matmul(&rz(p), &rx(t)), &rz(l));
            assert!(max_diff(&su2(t, p, l), &zxz) < 1e-12);
        }
    }

    #[test]
    fn gates_are_unitary() {
        for m in [rx(0.3), rz(-1.7), su2(0.4, 2.2, -0.9)] {
            let p = matmul(&m, &adjoint(&m));
            assert!(max_diff(&p, &identity()) < 1e-12);
        }
    }

    #[test]
    fn hadamard_as_su2() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h: Mat2<f64> = [
            C::new(s, 0.0),
            C::new(s, 0.0),
            C::new(s, 0.0),
            C::new(-s, 0.0),
        ];
        assert!(phase_equal(&su2(FRAC_PI_2, FRAC_PI_2, FRAC_PI_2), &h) < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(Gate::<f64>::Cz {
            control: 1,
            target: 1
        }
        .validate(3)
        .is_err());
        assert!(Gate::<f64>::Rx {
            qubit: 3,
            angle: 0.0
        }
        .validate(3)
        .is_err());
        assert!(Gate::<f64>::Cz {
            control: 0,
            target: 2
        }
        .validate(3)
        .is_ok());
    }
}
