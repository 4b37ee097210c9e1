//! Dense statevector simulation and single-qubit state analysis.

mod density;
mod gate;
mod state;

pub use density::{fidelity, infidelity, DensityMatrix1Q};
pub use gate::{adjoint, identity, matmul, rx, rz, su2, Gate, Mat2};
pub use state::{apply_gate, run_gates, Counts, StateVector};

#[cfg(test)]
mod tests;
