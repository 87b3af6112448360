use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::circuit::ParameterizedCircuit;
use super::gate::{Angle, Gate, GateKind};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    /// Brick layers of CZ on adjacent pairs, each followed by RY on both qubits.
    SimplifiedTwoDesign,
    /// RZ-RY-RZ on every qubit, then a ring of CNOTs whose range cycles per layer.
    StronglyEntanglingLayers,
    /// One random Pauli rotation per qubit, then each adjacent CZ with probability 1/2.
    RandomPauliCz,
    /// One random gate from {I, RX, RY, RZ} per qubit, all sharing the layer's slot.
    ProductStateShared,
    /// RZ then RY on every qubit, then CZ on all pairs.
    BanditLayer,
}

impl AnsatzKind {
    pub fn needs_seed(self) -> bool {
        matches!(self, AnsatzKind::RandomPauliCz | AnsatzKind::ProductStateShared)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    pub n_qubits: usize,
    pub depth: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl AnsatzSpec {
    pub fn new(kind: AnsatzKind, n_qubits: usize, depth: usize) -> Self {
        Self {
            kind,
            n_qubits,
            depth,
            seed: None,
        }
    }

    pub fn seeded(kind: AnsatzKind, n_qubits: usize, depth: usize, seed: u64) -> Self {
        Self {
            kind,
            n_qubits,
            depth,
            seed: Some(seed),
        }
    }
}

/// Builds the circuit described by `spec`. Every ansatz starts with an RY
/// angle-encoding layer reading one agent-state feature per qubit.
pub fn build_ansatz(spec: &AnsatzSpec) -> Result<ParameterizedCircuit> {
    let n = spec.n_qubits;
    if spec.depth < 1 {
        return Err(Error::InvalidAnsatz("depth must be >= 1".into()));
    }
    if n < 1 {
        return Err(Error::InvalidAnsatz("n_qubits must be >= 1".into()));
    }
    if spec.kind.needs_seed() && spec.seed.is_none() {
        return Err(Error::InvalidAnsatz(format!("{:?} requires a seed", spec.kind)));
    }
    if spec.kind == AnsatzKind::SimplifiedTwoDesign && n < 2 {
        return Err(Error::InvalidAnsatz(
            "simplified two-design needs at least two qubits".into(),
        ));
    }

    let encoding: Vec<Gate> = (0..n).map(|q| Gate::ry(q, Angle::Feature(q))).collect();
    let mut body = Vec::new();
    let mut layers = Vec::with_capacity(spec.depth);
    let mut next_slot = 0usize;
    let mut slot = || {
        next_slot += 1;
        next_slot - 1
    };
    let mut rng = spec.seed.map(|s| rng::stream(s, &[]));

    for layer in 0..spec.depth {
        let start = slot_peek(&body);
        match spec.kind {
            AnsatzKind::SimplifiedTwoDesign => {
                for parity in 0..2 {
                    for i in (parity..n.saturating_sub(1)).step_by(2) {
                        body.push(Gate::cz(i, i + 1));
                        body.push(Gate::ry(i, Angle::Slot(slot())));
                        body.push(Gate::ry(i + 1, Angle::Slot(slot())));
                    }
                }
            }
            AnsatzKind::StronglyEntanglingLayers => {
                for q in 0..n {
                    body.push(Gate::rz(q, Angle::Slot(slot())));
                    body.push(Gate::ry(q, Angle::Slot(slot())));
                    body.push(Gate::rz(q, Angle::Slot(slot())));
                }
                if n > 1 {
                    let range = layer % (n - 1) + 1;
                    for q in 0..n {
                        body.push(Gate::cnot(q, (q + range) % n));
                    }
                }
            }
            AnsatzKind::RandomPauliCz => {
                let rng = rng.as_mut().expect("checked above");
                for q in 0..n {
                    let kind = [GateKind::Rx, GateKind::Ry, GateKind::Rz][rng.random_range(0..3)];
                    body.push(Gate::rotation(kind, q, Angle::Slot(slot())));
                }
                for q in 0..n.saturating_sub(1) {
                    if rng.random_bool(0.5) {
                        body.push(Gate::cz(q, q + 1));
                    }
                }
            }
            AnsatzKind::ProductStateShared => {
                // Keyed by (layer, qubit) so circuits of different widths
                // built from one seed agree on their common qubits.
                let seed = spec.seed.expect("checked above");
                let shared = slot();
                for q in 0..n {
                    let pick = rng::stream(seed, &[layer as u64, q as u64]).random_range(0..4);
                    body.push(match pick {
                        0 => Gate::identity(q, Some(shared)),
                        1 => Gate::rx(q, Angle::Slot(shared)),
                        2 => Gate::ry(q, Angle::Slot(shared)),
                        _ => Gate::rz(q, Angle::Slot(shared)),
                    });
                }
            }
            AnsatzKind::BanditLayer => {
                for q in 0..n {
                    body.push(Gate::rz(q, Angle::Slot(slot())));
                    body.push(Gate::ry(q, Angle::Slot(slot())));
                }
                for a in 0..n {
                    for b in a + 1..n {
                        body.push(Gate::cz(a, b));
                    }
                }
            }
        }
        let end = slot_peek(&body);
        layers.push(start..end);
    }

    Ok(ParameterizedCircuit::new(n, encoding, body)?.with_layers(layers))
}

/// One past the largest slot referenced so far.
fn slot_peek(body: &[Gate]) -> usize {
    body.iter().filter_map(Gate::slot).map(|s| s + 1).max().unwrap_or(0)
}
