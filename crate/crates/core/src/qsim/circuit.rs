use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::gate::{Angle, Gate, GateKind};
use super::state::StateVector;
use crate::error::{Error, Result};

/// Angle encoding prefix followed by a parameterized body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterizedCircuit {
    n_qubits: usize,
    n_features: usize,
    encoding: Vec<Gate>,
    body: Vec<Gate>,
    n_params: usize,
    /// Body gate indices bound to each slot.
    sharing: Vec<Vec<usize>>,
    /// Slot range owned by each body layer, when the builder knows it.
    layers: Vec<Range<usize>>,
}

/// Extra angle added to one body gate, used by the parameter-shift rule when
/// a slot is shared by several gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateShift {
    pub gate: usize,
    pub delta: f64,
}

impl ParameterizedCircuit {
    pub fn new(n_qubits: usize, encoding: Vec<Gate>, body: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidAnsatz("circuit needs at least one qubit".into()));
        }
        let mut n_features = 0;
        for g in &encoding {
            g.validate(n_qubits)?;
            match g.angle {
                Some(Angle::Slot(_)) => {
                    return Err(Error::InvalidGate(
                        "encoding gates may not reference a parameter slot".into(),
                    ))
                }
                Some(Angle::Feature(f)) => n_features = n_features.max(f + 1),
                _ => {}
            }
        }
        if n_features > n_qubits {
            return Err(Error::InvalidGate(
                "angle encoding uses one feature per qubit at most".into(),
            ));
        }
        let mut n_params = 0;
        for g in &body {
            g.validate(n_qubits)?;
            match g.angle {
                Some(Angle::Feature(_)) => {
                    return Err(Error::InvalidGate("body gates may not read features".into()))
                }
                Some(Angle::Slot(s)) => n_params = n_params.max(s + 1),
                _ => {}
            }
        }
        let mut sharing = vec![Vec::new(); n_params];
        for (i, g) in body.iter().enumerate() {
            if let Some(s) = g.slot() {
                sharing[s].push(i);
            }
        }
        if let Some(unused) = sharing.iter().position(Vec::is_empty) {
            return Err(Error::InvalidAnsatz(format!("parameter slot {unused} is unused")));
        }
        // The agent state always carries one feature per qubit; gates may read fewer.
        Ok(Self {
            n_qubits,
            n_features: n_qubits,
            encoding,
            body,
            n_params,
            sharing,
            layers: Vec::new(),
        })
    }

    pub(crate) fn with_layers(mut self, layers: Vec<Range<usize>>) -> Self {
        self.layers = layers;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Length of the agent-state vector `s`.
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn encoding(&self) -> &[Gate] {
        &self.encoding
    }

    pub fn body(&self) -> &[Gate] {
        &self.body
    }

    /// Body gate indices bound to `slot`.
    pub fn gates_for_slot(&self, slot: usize) -> &[usize] {
        &self.sharing[slot]
    }

    pub fn is_shared(&self, slot: usize) -> bool {
        self.sharing[slot].len() > 1
    }

    /// Slot ranges per body layer (empty for hand-built circuits).
    pub fn layers(&self) -> &[Range<usize>] {
        &self.layers
    }

    /// First slot of the middle body layer, or slot 0 without layer metadata.
    pub fn middle_slot(&self) -> usize {
        match self.layers.len() {
            0 => 0,
            l => self.layers[l / 2].start,
        }
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.body.iter().filter(|g| g.kind == kind).count()
    }

    fn check_inputs(&self, s: &[f64], theta: &[f64]) -> Result<()> {
        if s.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "agent state",
                expected: self.n_features,
                got: s.len(),
            });
        }
        if theta.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.n_params,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Prepares `|psi(s, theta)>` into `out`, optionally shifting one body gate.
    pub fn run_into(
        &self,
        s: &[f64],
        theta: &[f64],
        shift: Option<GateShift>,
        out: &mut StateVector,
    ) -> Result<()> {
        self.check_inputs(s, theta)?;
        if out.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                what: "output buffer qubits",
                expected: self.n_qubits,
                got: out.n_qubits(),
            });
        }
        out.reset();
        for g in &self.encoding {
            let angle = match g.angle {
                Some(Angle::Feature(f)) => s[f],
                Some(Angle::Fixed(a)) => a,
                _ => 0.0,
            };
            g.apply(out, angle);
        }
        for (i, g) in self.body.iter().enumerate() {
            let mut angle = match g.angle {
                Some(Angle::Slot(k)) => theta[k],
                Some(Angle::Fixed(a)) => a,
                _ => 0.0,
            };
            if let Some(sh) = shift {
                if sh.gate == i {
                    angle += sh.delta;
                }
            }
            g.apply(out, angle);
        }
        Ok(())
    }

    pub fn run_shifted(
        &self,
        s: &[f64],
        theta: &[f64],
        shift: Option<GateShift>,
    ) -> Result<StateVector> {
        let mut out = StateVector::zero(self.n_qubits)?;
        self.run_into(s, theta, shift, &mut out)?;
        Ok(out)
    }
}

/// Evaluates the circuit on agent state `s` and parameters `theta`.
pub fn run(circuit: &ParameterizedCircuit, s: &[f64], theta: &[f64]) -> Result<StateVector> {
    circuit.run_shifted(s, theta, None)
}
