use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::DensityMatrix1Q;
use super::gate::{Gate, Mat2};
use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Below this many amplitudes kernels stay on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

/// Dense statevector. Qubit `q` is bit `q` of the basis-state index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    num_qubits: usize,
    amps: Vec<C<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub zeros: u64,
    pub ones: u64,
}

impl<T: Real> StateVector<T> {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![C::zero(); 1 << num_qubits];
        amps[0] = C::one();
        Self { num_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Invalid(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let state = Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        };
        let norm = state.norm_sqr();
        if (norm - T::one()).abs() > T::STATE_TOL.sqrt() {
            return Err(Error::Invalid(format!("state norm^2 = {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit < self.num_qubits {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            })
        }
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate<T>) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            Gate::Cz { control, target } => self.apply_cz(control, target),
            _ => {
                let m = gate.matrix().expect("single-qubit gate");
                self.apply_matrix(gate.qubits().0, &m);
            }
        }
        Ok(())
    }

    /// Applies an arbitrary 2x2 matrix to `qubit`. The matrix need not be unitary.
    pub fn apply_matrix(&mut self, qubit: usize, m: &Mat2<T>) {
        debug_assert!(qubit < self.num_qubits);
        let half = 1usize << qubit;
        let m = *m;
        let kernel = move |chunk: &mut [C<T>]| {
            let (lo, hi) = chunk.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = m[0] * x + m[1] * y;
                *b = m[2] * x + m[3] * y;
            }
        };
        if self.amps.len() >= PAR_THRESHOLD {
            self.amps.par_chunks_mut(2 * half).for_each(kernel);
        } else {
            self.amps.chunks_mut(2 * half).for_each(kernel);
        }
    }

    pub(crate) fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        let flip = |(i, amp): (usize, &mut C<T>)| {
            if i & mask == mask {
                *amp = -*amp;
            }
        };
        if self.amps.len() >= PAR_THRESHOLD {
            self.amps.par_iter_mut().enumerate().for_each(flip);
        } else {
            self.amps.iter_mut().enumerate().for_each(flip);
        }
    }

    /// Probability of reading `1` on `qubit`.
    pub fn prob_one(&self, qubit: usize) -> Result<T> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// `<Z_qubit>`, computed exactly from the amplitudes.
    pub fn expectation_z(&self, qubit: usize) -> Result<T> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        let (mut plus, mut minus) = (T::zero(), T::zero());
        for (i, a) in self.amps.iter().enumerate() {
            if i & bit == 0 {
                plus += a.norm_sqr();
            } else {
                minus += a.norm_sqr();
            }
        }
        Ok(plus - minus)
    }

    /// Partial trace over every qubit except `qubit`.
    pub fn reduced_density(&self, qubit: usize) -> Result<DensityMatrix1Q<T>> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        let (mut r00, mut r11) = (T::zero(), T::zero());
        let mut r01 = C::zero();
        for i in (0..self.amps.len()).filter(|i| i & bit == 0) {
            let a0 = self.amps[i];
            let a1 = self.amps[i | bit];
            r00 += a0.norm_sqr();
            r11 += a1.norm_sqr();
            r01 += a0 * a1.conj();
        }
        DensityMatrix1Q::new(
            C::new(r00, T::zero()),
            r01,
            r01.conj(),
            C::new(r11, T::zero()),
        )
    }

    /// Finite-shot readout of one qubit's marginal.
    pub fn sample_counts<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        shots: u64,
        rng: &mut R,
    ) -> Result<Counts> {
        if shots == 0 {
            return Err(Error::Invalid("shots must be at least 1".into()));
        }
        let p1 = self.prob_one(qubit)?.as_f64().clamp(0.0, 1.0);
        let ones = Binomial::new(shots, p1)
            .map_err(|e| Error::Invalid(e.to_string()))?
            .sample(rng);
        Ok(Counts {
            zeros: shots - ones,
            ones,
        })
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .fold(C::zero(), |acc, x| acc + x)
    }

    /// Applies a diagonal sign/scale to the amplitudes: used for observables.
    pub(crate) fn apply_z(&mut self, qubit: usize) {
        let bit = 1usize << qubit;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
    }
}

/// Functional form of [`StateVector::apply`].
pub fn apply_gate<T: Real>(state: &StateVector<T>, gate: &Gate<T>) -> Result<StateVector<T>> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// Applies `gates` in order starting from `|0...0>`.
pub fn run_gates<T: Real>(num_qubits: usize, gates: &[Gate<T>]) -> Result<StateVector<T>> {
    let mut state = StateVector::zero(num_qubits);
    for g in gates {
        state.apply(g)?;
    }
    Ok(state)
}
