use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cz,
    Cnot,
    /// Identity. May still be bound to a parameter slot so that a layer whose
    /// randomly drawn gates are all identities keeps its slot in use.
    I,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Cz | GateKind::Cnot)
    }
}

/// Where a rotation angle comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Trainable parameter `theta[slot]`.
    Slot(usize),
    /// Agent-state feature `s[index]` (encoding gates only).
    Feature(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn rotation(kind: GateKind, target: usize, angle: Angle) -> Self {
        Self {
            kind,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    pub fn rx(target: usize, angle: Angle) -> Self {
        Self::rotation(GateKind::Rx, target, angle)
    }

    pub fn ry(target: usize, angle: Angle) -> Self {
        Self::rotation(GateKind::Ry, target, angle)
    }

    pub fn rz(target: usize, angle: Angle) -> Self {
        Self::rotation(GateKind::Rz, target, angle)
    }

    pub fn identity(target: usize, slot: Option<usize>) -> Self {
        Self {
            kind: GateKind::I,
            target,
            control: None,
            angle: slot.map(Angle::Slot),
        }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Self {
            kind: GateKind::Cz,
            target: b,
            control: Some(a),
            angle: None,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            angle: None,
        }
    }

    pub fn slot(&self) -> Option<usize> {
        match self.angle {
            Some(Angle::Slot(s)) => Some(s),
            _ => None,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGate(format!("{self:?}: {msg}")));
        if self.target >= n_qubits {
            return bad(format!("target out of range for {n_qubits} qubits"));
        }
        match self.kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                if self.control.is_some() {
                    return bad("rotation gates take no control".into());
                }
                if self.angle.is_none() {
                    return bad("rotation needs a slot, feature or fixed angle".into());
                }
            }
            GateKind::I => {
                if self.control.is_some() {
                    return bad("identity takes no control".into());
                }
                if matches!(self.angle, Some(Angle::Feature(_) | Angle::Fixed(_))) {
                    return bad("identity may only be bound to a slot".into());
                }
            }
            GateKind::Cz | GateKind::Cnot => {
                let Some(c) = self.control else {
                    return bad("two-qubit gate needs a control".into());
                };
                if c >= n_qubits {
                    return bad(format!("control out of range for {n_qubits} qubits"));
                }
                if c == self.target {
                    return bad("control equals target".into());
                }
                if self.angle.is_some() {
                    return bad("two-qubit gates are not parameterized".into());
                }
            }
        }
        Ok(())
    }

    /// Applies the gate with rotation angle `theta` (ignored by CZ/CNOT/I).
    pub fn apply(&self, psi: &mut StateVector, theta: f64) {
        let q = self.target;
        match self.kind {
            GateKind::Rx => {
                let (s, c) = (0.5 * theta).sin_cos();
                let d = Complex64::new(c, 0.0);
                let o = Complex64::new(0.0, -s);
                psi.apply_1q(q, [[d, o], [o, d]]);
            }
            GateKind::Ry => {
                let (s, c) = (0.5 * theta).sin_cos();
                psi.apply_real_1q(q, c, s);
            }
            GateKind::Rz => {
                let (s, c) = (0.5 * theta).sin_cos();
                psi.apply_diag_1q(q, Complex64::new(c, -s), Complex64::new(c, s));
            }
            GateKind::Cz => psi.apply_cz(self.control.expect("validated"), q),
            GateKind::Cnot => psi.apply_cnot(self.control.expect("validated"), q),
            GateKind::I => {}
        }
    }
}
