use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{Real, C};
use crate::simulator::{adjoint, matmul, rx, rz, su2, Gate, Mat2, StateVector};

/// Where an angle slot takes its value from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum SlotRole {
    /// `theta[param]`.
    Trainable {
        param: usize,
    },
    /// `theta[param] + x[feature]`.
    Encoded {
        param: usize,
        feature: usize,
    },
    /// `x[feature]` only.
    Data {
        feature: usize,
    },
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBinding {
    pub slot: usize,
    #[serde(flatten)]
    pub role: SlotRole,
}

impl ParameterBinding {
    pub fn param(&self) -> Option<usize> {
        match self.role {
            SlotRole::Trainable { param } | SlotRole::Encoded { param, .. } => Some(param),
            _ => None,
        }
    }

    pub fn feature(&self) -> Option<usize> {
        match self.role {
            SlotRole::Encoded { feature, .. } | SlotRole::Data { feature } => Some(feature),
            _ => None,
        }
    }
}

/// One instruction of a parameterized program. Angles are slot indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Op {
    Rx {
        qubit: usize,
        slot: usize,
    },
    Rz {
        qubit: usize,
        slot: usize,
    },
    /// Slots in execution order: `[lambda, theta, phi]`.
    Su2 {
        qubit: usize,
        slots: [usize; 3],
    },
    Cz {
        control: usize,
        target: usize,
    },
}

/// How derivatives of the measured expectation are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Two shifted circuit runs per slot.
    ParameterShift,
    /// Reverse sweep over the gate list; same values as the shift rule.
    #[default]
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<Op>,
    bindings: Vec<ParameterBinding>,
    num_params: usize,
    num_features: usize,
}

impl Circuit {
    /// Validates the program: qubit ranges, one binding per slot, and every
    /// parameter/feature index bound exactly once.
    pub fn new(
        num_qubits: usize,
        ops: Vec<Op>,
        bindings: Vec<ParameterBinding>,
        num_params: usize,
        num_features: usize,
    ) -> Result<Self> {
        for (slot, b) in bindings.iter().enumerate() {
            if b.slot != slot {
                return Err(Error::Invalid(format!(
                    "binding {slot} carries slot id {}",
                    b.slot
                )));
            }
        }
        let mut slot_uses = vec![0usize; bindings.len()];
        for op in &ops {
            let qubits: Vec<usize> = match *op {
                Op::Rx { qubit, slot } | Op::Rz { qubit, slot } => {
                    *slot_uses.get_mut(slot).ok_or_else(|| unbound(slot))? += 1;
                    vec![qubit]
                }
                Op::Su2 { qubit, slots } => {
                    for s in slots {
                        *slot_uses.get_mut(s).ok_or_else(|| unbound(s))? += 1;
                    }
                    vec![qubit]
                }
                Op::Cz { control, target } => {
                    if control == target {
                        return Err(Error::DegenerateCz(control));
                    }
                    vec![control, target]
                }
            };
            if let Some(&q) = qubits.iter().find(|&&q| q >= num_qubits) {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
        }
        if let Some(s) = slot_uses.iter().position(|&u| u != 1) {
            return Err(Error::Invalid(format!(
                "slot {s} is used {} times",
                slot_uses[s]
            )));
        }
        let mut param_uses = vec![0usize; num_params];
        let mut feature_uses = vec![0usize; num_features];
        for b in &bindings {
            if let Some(p) = b.param() {
                *param_uses
                    .get_mut(p)
                    .ok_or_else(|| Error::Invalid(format!("parameter {p} out of range")))? += 1;
            }
            if let Some(f) = b.feature() {
                *feature_uses
                    .get_mut(f)
                    .ok_or_else(|| Error::Invalid(format!("feature {f} out of range")))? += 1;
            }
        }
        if let Some(p) = param_uses.iter().position(|&u| u != 1) {
            return Err(Error::Invalid(format!(
                "parameter {p} bound {} times",
                param_uses[p]
            )));
        }
        if let Some(f) = feature_uses.iter().position(|&u| u != 1) {
            return Err(Error::Invalid(format!(
                "feature {f} bound {} times",
                feature_uses[f]
            )));
        }
        Ok(Self {
            num_qubits,
            ops,
            bindings,
            num_params,
            num_features,
        })
    }

    pub fn empty(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            ops: Vec::new(),
            bindings: Vec::new(),
            num_params: 0,
            num_features: 0,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }
    pub fn num_params(&self) -> usize {
        self.num_params
    }
    pub fn num_features(&self) -> usize {
        self.num_features
    }
    pub fn ops(&self) -> &[Op] {
        &self.ops
    }
    pub fn bindings(&self) -> &[ParameterBinding] {
        &self.bindings
    }

    fn check_inputs<T>(&self, theta: &[T], x: &[T]) -> Result<()> {
        check_len("parameter vector", self.num_params, theta.len())?;
        check_len("feature vector", self.num_features, x.len())
    }

    /// Resolved angle of every slot.
    pub fn slot_angles<T: Real>(&self, theta: &[T], x: &[T]) -> Result<Vec<T>> {
        self.check_inputs(theta, x)?;
        Ok(self
            .bindings
            .iter()
            .map(|b| match b.role {
                SlotRole::Trainable { param } => theta[param],
                SlotRole::Encoded { param, feature } => theta[param] + x[feature],
                SlotRole::Data { feature } => x[feature],
                SlotRole::Fixed { value } => T::of(value),
            })
            .collect())
    }

    fn gate_for<T: Real>(op: &Op, angles: &[T]) -> Gate<T> {
        match *op {
            Op::Rx { qubit, slot } => Gate::Rx {
                qubit,
                angle: angles[slot],
            },
            Op::Rz { qubit, slot } => Gate::Rz {
                qubit,
                angle: angles[slot],
            },
            Op::Su2 {
                qubit,
                slots: [l, t, p],
            } => Gate::Su2 {
                qubit,
                theta: angles[t],
                phi: angles[p],
                lambda: angles[l],
            },
            Op::Cz { control, target } => Gate::Cz { control, target },
        }
    }

    /// Concrete gate list for the given slot angles.
    pub fn gates_from_angles<T: Real>(&self, angles: &[T]) -> Vec<Gate<T>> {
        self.ops
            .iter()
            .map(|op| Self::gate_for(op, angles))
            .collect()
    }

    pub fn bind<T: Real>(&self, theta: &[T], x: &[T]) -> Result<Vec<Gate<T>>> {
        Ok(self.gates_from_angles(&self.slot_angles(theta, x)?))
    }

    pub fn run_angles<T: Real>(&self, angles: &[T]) -> StateVector<T> {
        let mut state = StateVector::zero(self.num_qubits);
        for op in &self.ops {
            apply_op(&mut state, op, angles);
        }
        state
    }

    /// Final state of the program from `|0...0>`.
    pub fn run<T: Real>(&self, theta: &[T], x: &[T]) -> Result<StateVector<T>> {
        Ok(self.run_angles(&self.slot_angles(theta, x)?))
    }

    /// `d<Z_qubit>/d angle` for every slot.
    pub fn slot_derivatives<T: Real>(
        &self,
        angles: &[T],
        qubit: usize,
        method: GradientMethod,
    ) -> Result<Vec<T>> {
        check_len("slot angles", self.bindings.len(), angles.len())?;
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(match method {
            GradientMethod::ParameterShift => self.shift_rule(angles, qubit, None),
            GradientMethod::Adjoint => self.adjoint_sweep(angles, qubit),
        })
    }

    /// Shift-rule derivatives restricted to `only` slots when given (others are zero).
    pub(crate) fn shift_rule<T: Real>(
        &self,
        angles: &[T],
        qubit: usize,
        only: Option<&[bool]>,
    ) -> Vec<T> {
        let shift = T::FRAC_PI_2();
        let mut shifted = angles.to_vec();
        (0..angles.len())
            .map(|s| {
                if only.is_some_and(|mask| !mask[s]) {
                    return T::zero();
                }
                shifted[s] = angles[s] + shift;
                let plus = expect_z(&self.run_angles(&shifted), qubit);
                shifted[s] = angles[s] - shift;
                let minus = expect_z(&self.run_angles(&shifted), qubit);
                shifted[s] = angles[s];
                (plus - minus) / T::of(2.0)
            })
            .collect()
    }

    fn adjoint_sweep<T: Real>(&self, angles: &[T], qubit: usize) -> Vec<T> {
        let mut grads = vec![T::zero(); angles.len()];
        let mut psi = self.run_angles(angles);
        let mut lambda = psi.clone();
        lambda.apply_z(qubit);
        let two = T::of(2.0);
        for op in self.ops.iter().rev() {
            match *op {
                Op::Cz { control, target } => {
                    psi.apply_cz(control, target);
                    lambda.apply_cz(control, target);
                }
                _ => {
                    let (q, u, derivs) = op_derivatives(op, angles);
                    let u_dag = adjoint(&u);
                    psi.apply_matrix(q, &u_dag);
                    for (slot, du) in derivs {
                        grads[slot] = two * matrix_element(&lambda, &psi, q, &du).re;
                    }
                    lambda.apply_matrix(q, &u_dag);
                }
            }
        }
        grads
    }
}

fn unbound(slot: usize) -> Error {
    Error::Invalid(format!("slot {slot} has no binding"))
}

fn expect_z<T: Real>(state: &StateVector<T>, qubit: usize) -> T {
    state.expectation_z(qubit).expect("qubit validated")
}

fn apply_op<T: Real>(state: &mut StateVector<T>, op: &Op, angles: &[T]) {
    match *op {
        Op::Cz { control, target } => state.apply_cz(control, target),
        Op::Rx { qubit, slot } => state.apply_matrix(qubit, &rx(angles[slot])),
        Op::Rz { qubit, slot } => state.apply_matrix(qubit, &rz(angles[slot])),
        Op::Su2 {
            qubit,
            slots: [l, t, p],
        } => state.apply_matrix(qubit, &su2(angles[t], angles[p], angles[l])),
    }
}

fn pauli_x<T: Real>() -> Mat2<T> {
    let (z, o) = (C::zero(), Complex::new(T::one(), T::zero()));
    [z, o, o, z]
}

fn pauli_z<T: Real>() -> Mat2<T> {
    let (z, o) = (C::zero(), Complex::new(T::one(), T::zero()));
    [o, z, z, -o]
}

fn scale<T: Real>(m: &Mat2<T>, k: C<T>) -> Mat2<T> {
    [m[0] * k, m[1] * k, m[2] * k, m[3] * k]
}

/// Gate matrix and its derivative with respect to each slot it consumes.
fn op_derivatives<T: Real>(op: &Op, angles: &[T]) -> (usize, Mat2<T>, Vec<(usize, Mat2<T>)>) {
    // d/da exp(-i a P / 2) = (-i/2) P exp(-i a P / 2)
    let k = Complex::new(T::zero(), -T::of(0.5));
    match *op {
        Op::Rx { qubit, slot } => {
            let u = rx(angles[slot]);
            (qubit, u, vec![(slot, scale(&matmul(&pauli_x(), &u), k))])
        }
        Op::Rz { qubit, slot } => {
            let u = rz(angles[slot]);
            (qubit, u, vec![(slot, scale(&matmul(&pauli_z(), &u), k))])
        }
        Op::Su2 {
            qubit,
            slots: [l, t, p],
        } => {
            let (zl, xt, zp) = (rz(angles[l]), rx(angles[t]), rz(angles[p]));
            let u = matmul(&zp, &matmul(&xt, &zl));
            let d_lambda = scale(&matmul(&u, &pauli_z()), k);
            let d_theta = scale(&matmul(&zp, &matmul(&pauli_x(), &matmul(&xt, &zl))), k);
            let d_phi = scale(&matmul(&pauli_z(), &u), k);
            (qubit, u, vec![(l, d_lambda), (t, d_theta), (p, d_phi)])
        }
        Op::Cz { .. } => unreachable!("CZ carries no parameters"),
    }
}

/// `<bra| M_qubit |ket>` without materializing `M|ket>`.
fn matrix_element<T: Real>(
    bra: &StateVector<T>,
    ket: &StateVector<T>,
    qubit: usize,
    m: &Mat2<T>,
) -> C<T> {
    let half = 1usize << qubit;
    let mut acc = C::zero();
    for (b, k) in bra
        .amplitudes()
        .chunks(2 * half)
        .zip(ket.amplitudes().chunks(2 * half))
    {
        for i in 0..half {
            let (k0, k1) = (k[i], k[i + half]);
            acc += b[i].conj() * (m[0] * k0 + m[1] * k1)
                + b[i + half].conj() * (m[2] * k0 + m[3] * k1);
        }
    }
    acc
}
