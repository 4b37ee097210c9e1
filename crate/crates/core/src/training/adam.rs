use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::scalar::Real;

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub beta1: T,
    pub beta2: T,
    pub lr: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(dim: usize, lr: T, beta1: T, beta2: T, eps: T) -> Self {
        Self {
            m: vec![T::zero(); dim],
            v: vec![T::zero(); dim],
            t: 0,
            beta1,
            beta2,
            lr,
            eps,
        }
    }

    /// One update in place:
    /// `m = b1 m + (1-b1) g`, `v = b2 v + (1-b2) g*g`,
    /// `theta -= lr * m_hat / (sqrt(v_hat) + eps)` with bias-corrected moments.
    pub fn step(&mut self, theta: &mut [T], grad: &[T]) -> Result<()> {
        check_len("parameter vector", self.m.len(), theta.len())?;
        check_len("gradient", self.m.len(), grad.len())?;
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form: returns the updated parameters and state.
pub fn adam_step<T: Real>(
    state: &AdamState<T>,
    theta: &[T],
    grad: &[T],
) -> Result<(Vec<T>, AdamState<T>)> {
    let mut state = state.clone();
    let mut theta = theta.to_vec();
    state.step(&mut theta, grad)?;
    Ok((theta, state))
}
