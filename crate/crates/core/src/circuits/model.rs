use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, GradientMethod, Op, ParameterBinding, SlotRole};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::simulator::{DensityMatrix1Q, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Emnist,
    Lcei,
}

/// Binary classifier: a parameterized circuit read out on one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub task: Task,
    pub block_sizes: Vec<usize>,
    pub output_qubit: usize,
    pub circuit: Circuit,
}

/// Classifier output. `p` is the probability of class 1, i.e. of reading
/// `|0>` on the output qubit: `p = (<Z> + 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub p: T,
    pub label_hat: u8,
}

impl<T: Real> Prediction<T> {
    pub fn from_p(p: T) -> Self {
        let label_hat = u8::from(p > T::of(0.5));
        Self { p, label_hat }
    }

    /// Probability assigned to `label`.
    pub fn prob_of(&self, label: u8) -> T {
        if label == 1 {
            self.p
        } else {
            T::one() - self.p
        }
    }

    /// `p = 0.5` is never counted as correct.
    pub fn is_correct(&self, label: u8) -> bool {
        self.prob_of(label) > T::of(0.5)
    }
}

/// Binary cross-entropy with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy<T: Real>(p: T, label: u8) -> T {
    let floor = T::of(1e-12);
    let p = p.max(floor).min(T::one() - floor);
    if label == 1 {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

/// `dL/dp` of [`cross_entropy`] (zero where the clamp is active).
pub fn cross_entropy_dp<T: Real>(p: T, label: u8) -> T {
    let floor = T::of(1e-12);
    if p < floor || p > T::one() - floor {
        return T::zero();
    }
    if label == 1 {
        -T::one() / p
    } else {
        T::one() / (T::one() - p)
    }
}

struct Builder {
    ops: Vec<Op>,
    bindings: Vec<ParameterBinding>,
    next_param: usize,
}

impl Builder {
    fn new() -> Self {
        Self {
            ops: Vec::new(),
            bindings: Vec::new(),
            next_param: 0,
        }
    }

    fn slot(&mut self, role: SlotRole) -> usize {
        let slot = self.bindings.len();
        self.bindings.push(ParameterBinding { slot, role });
        slot
    }

    fn fixed_su2(&mut self, qubit: usize, theta: f64, phi: f64, lambda: f64) {
        let l = self.slot(SlotRole::Fixed { value: lambda });
        let t = self.slot(SlotRole::Fixed { value: theta });
        let p = self.slot(SlotRole::Fixed { value: phi });
        self.ops.push(Op::Su2 {
            qubit,
            slots: [l, t, p],
        });
    }

    /// Variational angle slot; the first `encode` of them also carry a feature.
    fn variational(&mut self, encode: usize) -> usize {
        let param = self.next_param;
        self.next_param += 1;
        let role = if param < encode {
            SlotRole::Encoded {
                param,
                feature: param,
            }
        } else {
            SlotRole::Trainable { param }
        };
        self.slot(role)
    }

    /// Blocks of SU2 layers followed by brickwork CZ, then a final Rx on the
    /// output qubit.
    fn variational_stack(&mut self, n: usize, blocks: &[usize], encode: usize, output: usize) {
        for &size in blocks {
            let start = (n - size) / 2;
            for q in start..start + size {
                let l = self.variational(encode);
                let t = self.variational(encode);
                let p = self.variational(encode);
                self.ops.push(Op::Su2 {
                    qubit: q,
                    slots: [l, t, p],
                });
            }
            for offset in [0, 1] {
                let mut q = start + offset;
                while q + 1 < start + size {
                    self.ops.push(Op::Cz {
                        control: q,
                        target: q + 1,
                    });
                    q += 2;
                }
            }
        }
        let slot = self.variational(encode);
        self.ops.push(Op::Rx {
            qubit: output,
            slot,
        });
    }
}

fn check_blocks(n: usize, blocks: &[usize]) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("register needs at least one qubit".into()));
    }
    if blocks.iter().any(|&b| b == 0 || b > n) {
        return Err(Error::Invalid(format!(
            "block sizes {blocks:?} must lie in 1..={n}"
        )));
    }
    if blocks.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Invalid(format!(
            "block sizes {blocks:?} must be nonincreasing"
        )));
    }
    Ok(())
}

/// Number of trainable parameters of the variational stack: three per SU2 plus the final Rx.
pub fn variational_param_count(blocks: &[usize]) -> usize {
    3 * blocks.iter().sum::<usize>() + 1
}

/// Interleaved-encoding classifier: the first `d` variational angles in
/// execution order read `theta_i + x_i`, the rest are trainable only.
pub fn build_emnist_model(n: usize, blocks: &[usize], d: usize) -> Result<QnnModel> {
    check_blocks(n, blocks)?;
    let params = variational_param_count(blocks);
    if d > params {
        return Err(Error::Invalid(format!(
            "{d} features need {d} angle slots but the architecture has {params}"
        )));
    }
    let output = n / 2;
    let mut b = Builder::new();
    b.variational_stack(n, blocks, d, output);
    let circuit = Circuit::new(n, b.ops, b.bindings, b.next_param, d)?;
    Ok(QnnModel {
        task: Task::Emnist,
        block_sizes: blocks.to_vec(),
        output_qubit: output,
        circuit,
    })
}

/// Cluster-state preparation (H on all, CZ chain, Rx(alpha_i) per qubit)
/// followed by a purely trainable variational stack.
pub fn build_lcei_model(n: usize, blocks: &[usize]) -> Result<QnnModel> {
    if n < 2 {
        return Err(Error::Invalid(
            "cluster states need at least 2 qubits".into(),
        ));
    }
    check_blocks(n, blocks)?;
    let output = n / 2;
    let mut b = Builder::new();
    for q in 0..n {
        b.fixed_su2(q, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2);
    }
    for q in 0..n - 1 {
        b.ops.push(Op::Cz {
            control: q,
            target: q + 1,
        });
    }
    for q in 0..n {
        let slot = b.slot(SlotRole::Data { feature: q });
        b.ops.push(Op::Rx { qubit: q, slot });
    }
    b.variational_stack(n, blocks, 0, output);
    let circuit = Circuit::new(n, b.ops, b.bindings, b.next_param, n)?;
    Ok(QnnModel {
        task: Task::Lcei,
        block_sizes: blocks.to_vec(),
        output_qubit: output,
        circuit,
    })
}

/// Per-sample loss together with its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient<T> {
    pub loss: T,
    pub p: T,
    pub d_theta: Vec<T>,
    pub d_x: Vec<T>,
}

impl QnnModel {
    pub fn num_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }
    pub fn num_params(&self) -> usize {
        self.circuit.num_params()
    }
    pub fn num_features(&self) -> usize {
        self.circuit.num_features()
    }

    /// Number of slots whose angle is `theta + x`.
    pub fn num_encoded(&self) -> usize {
        self.circuit
            .bindings()
            .iter()
            .filter(|b| matches!(b.role, SlotRole::Encoded { .. }))
            .count()
    }

    pub fn state<T: Real>(&self, theta: &[T], x: &[T]) -> Result<StateVector<T>> {
        self.circuit.run(theta, x)
    }

    pub fn predict<T: Real>(&self, theta: &[T], x: &[T]) -> Result<Prediction<T>> {
        let z = self.state(theta, x)?.expectation_z(self.output_qubit)?;
        Ok(Prediction::from_p((z + T::one()) / T::of(2.0)))
    }

    /// Reduced state of the output qubit.
    pub fn output_density<T: Real>(&self, theta: &[T], x: &[T]) -> Result<DensityMatrix1Q<T>> {
        self.state(theta, x)?.reduced_density(self.output_qubit)
    }

    pub fn loss<T: Real>(&self, theta: &[T], x: &[T], label: u8) -> Result<T> {
        Ok(cross_entropy(self.predict(theta, x)?.p, label))
    }

    /// Cross-entropy and its gradient with respect to both `theta` and `x`.
    pub fn loss_gradient<T: Real>(
        &self,
        theta: &[T],
        x: &[T],
        label: u8,
        method: GradientMethod,
    ) -> Result<LossGradient<T>> {
        let angles = self.circuit.slot_angles(theta, x)?;
        let dz = self
            .circuit
            .slot_derivatives(&angles, self.output_qubit, method)?;
        let z = self
            .circuit
            .run_angles(&angles)
            .expectation_z(self.output_qubit)?;
        Ok(self.chain(z, &dz, label))
    }

    /// Shift-rule gradient evaluated only on slots that carry a masked feature.
    pub fn masked_input_gradient<T: Real>(
        &self,
        theta: &[T],
        x: &[T],
        label: u8,
        feature_mask: &[bool],
    ) -> Result<LossGradient<T>> {
        check_len("feature mask", self.num_features(), feature_mask.len())?;
        let angles = self.circuit.slot_angles(theta, x)?;
        let slots: Vec<bool> = self
            .circuit
            .bindings()
            .iter()
            .map(|b| b.feature().is_some_and(|f| feature_mask[f]))
            .collect();
        let dz = self
            .circuit
            .shift_rule(&angles, self.output_qubit, Some(&slots));
        let z = self
            .circuit
            .run_angles(&angles)
            .expectation_z(self.output_qubit)?;
        Ok(self.chain(z, &dz, label))
    }

    fn chain<T: Real>(&self, z: T, dz: &[T], label: u8) -> LossGradient<T> {
        let p = (z + T::one()) / T::of(2.0);
        let scale = cross_entropy_dp(p, label) / T::of(2.0);
        let mut d_theta = vec![T::zero(); self.num_params()];
        let mut d_x = vec![T::zero(); self.num_features()];
        for (b, &g) in self.circuit.bindings().iter().zip(dz) {
            if let Some(i) = b.param() {
                d_theta[i] += scale * g;
            }
            if let Some(j) = b.feature() {
                d_x[j] += scale * g;
            }
        }
        LossGradient {
            loss: cross_entropy(p, label),
            p,
            d_theta,
            d_x,
        }
    }
}

/// On-disk model: architecture plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub model: QnnModel,
    pub theta: Vec<f64>,
}

pub const MODEL_FORMAT: &str = "qnn-bench/model/v1";

impl ModelFile {
    pub fn new(model: QnnModel, theta: Vec<f64>) -> Result<Self> {
        check_len("parameter vector", model.num_params(), theta.len())?;
        Ok(Self {
            format: MODEL_FORMAT.into(),
            model,
            theta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("unsupported format tag {:?}", file.format),
            });
        }
        // Re-run construction checks on the deserialized program.
        let c = &file.model.circuit;
        Circuit::new(
            c.num_qubits(),
            c.ops().to_vec(),
            c.bindings().to_vec(),
            c.num_params(),
            c.num_features(),
        )?;
        check_len(
            "parameter vector",
            file.model.num_params(),
            file.theta.len(),
        )?;
        Ok(file)
    }
}
