//! Readout-error emulation and iterative Bayesian unfolding.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Median single-qubit readout fidelities of `|0>` and `|1>`.
pub const DEFAULT_F0: f64 = 0.959;
pub const DEFAULT_F1: f64 = 0.891;

/// `r[i][j] = Pr(measure j | prepared i)` over `2^k` outcomes. Outcome index
/// bit `q` is the result of qubit `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    pub qubits: usize,
    pub r: Vec<Vec<f64>>,
}

impl AssignmentMatrix {
    pub fn new(r: Vec<Vec<f64>>) -> Result<Self> {
        let dim = r.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Invalid(format!(
                "assignment matrix dimension {dim} is not 2^k"
            )));
        }
        for (i, row) in r.iter().enumerate() {
            check_len("assignment row", dim, row.len())?;
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Invalid(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            qubits: dim.trailing_zeros() as usize,
            r,
        })
    }

    pub fn single(f0: f64, f1: f64) -> Result<Self> {
        Self::new(vec![vec![f0, 1.0 - f0], vec![1.0 - f1, f1]])
    }

    /// Product of independent per-qubit matrices (no crosstalk); entry `q`
    /// of `fidelities` is `(F0, F1)` of qubit `q`.
    pub fn tensor(fidelities: &[(f64, f64)]) -> Result<Self> {
        if fidelities.is_empty() {
            return Err(Error::Invalid("no qubits".into()));
        }
        let singles: Vec<Self> = fidelities
            .iter()
            .map(|&(f0, f1)| Self::single(f0, f1))
            .collect::<Result<_>>()?;
        let dim = 1usize << fidelities.len();
        let r = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        singles
                            .iter()
                            .enumerate()
                            .map(|(q, m)| m.r[(i >> q) & 1][(j >> q) & 1])
                            .product()
                    })
                    .collect()
            })
            .collect();
        Self::new(r)
    }

    /// Identical default fidelities on `k` qubits.
    pub fn default_for(k: usize) -> Result<Self> {
        Self::tensor(&vec![(DEFAULT_F0, DEFAULT_F1); k])
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// Measured distribution `w = R^T v`.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("distribution", self.dim(), v.len())?;
        Ok((0..self.dim())
            .map(|j| (0..self.dim()).map(|i| self.r[i][j] * v[i]).sum())
            .collect())
    }
}

fn check_simplex(v: &[f64]) -> Result<()> {
    let s: f64 = v.iter().sum();
    if v.iter().any(|&p| !(p >= -1e-12)) || (s - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid(format!(
            "not a probability vector (sum {s})"
        )));
    }
    Ok(())
}

/// Samples `shots` noisy readouts of `true_dist`. Returns counts per outcome.
pub fn apply_readout_noise(
    true_dist: &[f64],
    r: &AssignmentMatrix,
    shots: u64,
    rng: &mut impl Rng,
) -> Result<Vec<u64>> {
    check_simplex(true_dist)?;
    if shots == 0 {
        return Err(Error::Invalid("need at least one shot".into()));
    }
    let w = r.forward(true_dist)?;
    // Multinomial as a chain of conditional binomials.
    let mut counts = vec![0u64; w.len()];
    let mut left = shots;
    let mut mass = 1.0;
    for (j, &p) in w.iter().enumerate() {
        if left == 0 {
            break;
        }
        if j + 1 == w.len() {
            counts[j] = left;
            break;
        }
        let q = (p.max(0.0) / mass).clamp(0.0, 1.0);
        let c = if q > 0.0 {
            Binomial::new(left, q)
                .map_err(|e| Error::Invalid(e.to_string()))?
                .sample(rng)
        } else {
            0
        };
        counts[j] = c;
        left -= c;
        mass -= p;
    }
    Ok(counts)
}

pub fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unfolded {
    pub v: Vec<f64>,
    pub iterations: usize,
    /// Largest component change in the final iteration.
    pub delta: f64,
}

/// Iterative Bayesian unfolding from a uniform prior:
/// `v_j <- v_j * sum_i R[j][i] w_i / (sum_k R[k][i] v_k)`.
/// Stops after `max_iter` iterations or once the update falls below `tol`.
pub fn ibu_correct(w: &[f64], r: &AssignmentMatrix, max_iter: usize, tol: f64) -> Result<Unfolded> {
    let dim = r.dim();
    check_len("measured distribution", dim, w.len())?;
    check_simplex(w)?;
    let mut v = vec![1.0 / dim as f64; dim];
    let mut delta = 0.0;
    let mut iterations = 0;
    while iterations < max_iter {
        let fwd = r.forward(&v)?;
        let mut next = vec![0.0; dim];
        for (j, nj) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..dim {
                if w[i] == 0.0 {
                    continue;
                }
                if fwd[i] <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "outcome {i} was observed but has zero predicted probability"
                    )));
                }
                acc += r.r[j][i] * w[i] / fwd[i];
            }
            *nj = v[j] * acc;
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        iterations += 1;
        if delta < tol {
            break;
        }
    }
    Ok(Unfolded {
        v,
        iterations,
        delta,
    })
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
