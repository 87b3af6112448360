//! Exact dense statevector simulation.
//!
//! Basis index convention is big-endian: qubit 0 is the most significant bit
//! of the index, so `|q0 q1 ... q_{n-1}>` reads left to right as a binary
//! number. Rotations follow `R_P(theta) = exp(-i theta P / 2)`.

mod ansatz;
mod circuit;
mod gate;
mod state;

pub use ansatz::{build_ansatz, AnsatzKind, AnsatzSpec};
pub use circuit::{run, GateShift, ParameterizedCircuit};
pub use gate::{Angle, Gate, GateKind};
pub use state::{basis_probabilities, sample_shots, Histogram, StateVector, MAX_QUBITS};
