//! Parameter-shift derivatives of action probabilities and log-policy gradients.
//!
//! Every rotation gate is `exp(-i theta P / 2)` for a Pauli `P`, so the two-term
//! shift rule is exact gate by gate. A slot bound to several gates is
//! differentiated by the chain rule: each gate is shifted on its own and the
//! per-gate terms are summed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{normalize_masses, ActionPartition, PolicyDistribution, Source};
use crate::qsim::{basis_probabilities, sample_shots, GateShift, ParameterizedCircuit, StateVector};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRule {
    pub alpha: f64,
    pub scale: f64,
}

impl ShiftRule {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "shift must lie in (0, pi), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            scale: 1.0 / (2.0 * alpha.sin()),
        })
    }
}

impl Default for ShiftRule {
    fn default() -> Self {
        Self {
            alpha: std::f64::consts::FRAC_PI_2,
            scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    pub values: Vec<f64>,
    /// Circuit executions consumed.
    pub evals_used: u64,
}

impl GradientVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Exact,
    /// Each circuit execution draws `shots` samples from its own derived seed.
    Shots { shots: u64, seed: u64 },
}

const BASE_PATH: u64 = 0;
const SHIFT_PATH: u64 = 1;

/// Derivatives of every action probability with respect to selected slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    /// Policy at the unshifted parameters (under the same estimator).
    pub policy: PolicyDistribution,
    pub slots: Vec<usize>,
    /// `rows[k][a] = d pi(a) / d theta_{slots[k]}`.
    pub rows: Vec<Vec<f64>>,
    pub evals_used: u64,
}

/// A circuit paired with a partition and shift rule; the unit the agent and
/// the analysis code differentiate.
#[derive(Debug, Clone, Copy)]
pub struct PolicyModel<'a> {
    pub circuit: &'a ParameterizedCircuit,
    pub partition: &'a ActionPartition,
    pub rule: ShiftRule,
}

impl<'a> PolicyModel<'a> {
    pub fn new(circuit: &'a ParameterizedCircuit, partition: &'a ActionPartition) -> Result<Self> {
        if circuit.n_qubits() != partition.n_qubits() {
            return Err(Error::DimensionMismatch {
                what: "partition qubits",
                expected: circuit.n_qubits(),
                got: partition.n_qubits(),
            });
        }
        Ok(Self {
            circuit,
            partition,
            rule: ShiftRule::default(),
        })
    }

    pub fn with_rule(mut self, rule: ShiftRule) -> Self {
        self.rule = rule;
        self
    }

    fn masses(
        &self,
        s: &[f64],
        theta: &[f64],
        shift: Option<GateShift>,
        estimator: Estimator,
        path: &[u64],
        buf: &mut StateVector,
    ) -> Result<Vec<f64>> {
        self.circuit.run_into(s, theta, shift, buf)?;
        match estimator {
            Estimator::Exact => Ok(self.partition.action_masses(&basis_probabilities(buf))),
            Estimator::Shots { shots, seed } => {
                let hist = sample_shots(buf, shots, derive_seed(seed, path))?;
                let freq = hist.frequencies();
                Ok(self.partition.action_masses(&freq))
            }
        }
    }

    fn source(estimator: Estimator) -> Source {
        match estimator {
            Estimator::Exact => Source::Exact,
            Estimator::Shots { shots, .. } => Source::Shots(shots),
        }
    }

    /// Policy at `theta` under the estimator.
    pub fn policy(&self, s: &[f64], theta: &[f64], estimator: Estimator) -> Result<PolicyDistribution> {
        let mut buf = StateVector::zero(self.circuit.n_qubits())?;
        let masses = self.masses(s, theta, None, estimator, &[BASE_PATH], &mut buf)?;
        normalize_masses(self.partition, masses, Self::source(estimator))
    }

    /// Shift-rule derivative of all action probabilities for the given slots.
    pub fn jacobian(
        &self,
        s: &[f64],
        theta: &[f64],
        slots: &[usize],
        estimator: Estimator,
    ) -> Result<Jacobian> {
        let n_params = self.circuit.n_params();
        if theta.len() != n_params {
            return Err(Error::DimensionMismatch {
                what: "theta",
                expected: n_params,
                got: theta.len(),
            });
        }
        if let Some(&bad) = slots.iter().find(|&&l| l >= n_params) {
            return Err(Error::InvalidArgument(format!(
                "slot {bad} out of range for {n_params} parameters"
            )));
        }
        let mut buf = StateVector::zero(self.circuit.n_qubits())?;
        let base = self.masses(s, theta, None, estimator, &[BASE_PATH], &mut buf)?;
        let mut evals = 1u64;
        let n_actions = self.partition.n_actions();
        let alpha = self.rule.alpha;
        let mut rows = Vec::with_capacity(slots.len());
        for &slot in slots {
            let mut d = vec![0.0; n_actions];
            for &gate in self.circuit.gates_for_slot(slot) {
                let g = gate as u64;
                let plus = self.masses(
                    s,
                    theta,
                    Some(GateShift { gate, delta: alpha }),
                    estimator,
                    &[SHIFT_PATH, g, 0],
                    &mut buf,
                )?;
                let minus = self.masses(
                    s,
                    theta,
                    Some(GateShift { gate, delta: -alpha }),
                    estimator,
                    &[SHIFT_PATH, g, 1],
                    &mut buf,
                )?;
                evals += 2;
                for a in 0..n_actions {
                    d[a] += self.rule.scale * (plus[a] - minus[a]);
                }
            }
            if !self.partition.is_full() {
                // Renormalized policy: quotient rule on the raw projector masses.
                let total: f64 = base.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ZeroProjectorMass);
                }
                let dtotal: f64 = d.iter().sum();
                for a in 0..n_actions {
                    d[a] = (d[a] * total - base[a] * dtotal) / (total * total);
                }
            }
            rows.push(d);
        }
        let policy = normalize_masses(self.partition, base, Self::source(estimator))?;
        Ok(Jacobian {
            policy,
            slots: slots.to_vec(),
            rows,
            evals_used: evals,
        })
    }

    /// Log-policy gradient restricted to `slots`, with the denominator floored.
    pub fn log_grad_slots(
        &self,
        s: &[f64],
        theta: &[f64],
        action: usize,
        slots: &[usize],
        estimator: Estimator,
        clip_floor: Option<f64>,
    ) -> Result<(GradientVector, PolicyDistribution)> {
        self.check_action(action)?;
        let jac = self.jacobian(s, theta, slots, estimator)?;
        let denom = jac.policy.probs[action].max(clip_floor.unwrap_or(0.0));
        if denom <= 0.0 {
            return Err(Error::ZeroProbability { action });
        }
        let values = jac.rows.iter().map(|row| row[action] / denom).collect();
        Ok((
            GradientVector {
                values,
                evals_used: jac.evals_used,
            },
            jac.policy,
        ))
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.partition.n_actions() {
            return Err(Error::InvalidArgument(format!(
                "action {action} out of range for |A| = {}",
                self.partition.n_actions()
            )));
        }
        Ok(())
    }

    fn all_slots(&self) -> Vec<usize> {
        (0..self.circuit.n_params()).collect()
    }
}

/// Shift-rule gradient of `pi(action)`. `evals_used` counts the two shifted
/// executions per gate occurrence; the projector scheme needs one more for the
/// normalizing mass.
pub fn shift_grad_action_prob(
    circuit: &ParameterizedCircuit,
    s: &[f64],
    theta: &[f64],
    partition: &ActionPartition,
    action: usize,
    rule: ShiftRule,
    estimator: Estimator,
) -> Result<GradientVector> {
    let model = PolicyModel::new(circuit, partition)?.with_rule(rule);
    model.check_action(action)?;
    let jac = model.jacobian(s, theta, &model.all_slots(), estimator)?;
    let base_eval = u64::from(partition.is_full());
    Ok(GradientVector {
        values: jac.rows.iter().map(|r| r[action]).collect(),
        evals_used: jac.evals_used - base_eval,
    })
}

/// `grad pi(a) / max(pi(a), floor)`. Fails on a zero-probability action
/// without a floor.
#[allow(clippy::too_many_arguments)]
pub fn log_policy_grad(
    circuit: &ParameterizedCircuit,
    s: &[f64],
    theta: &[f64],
    partition: &ActionPartition,
    action: usize,
    rule: ShiftRule,
    estimator: Estimator,
    clip_floor: Option<f64>,
) -> Result<GradientVector> {
    let model = PolicyModel::new(circuit, partition)?.with_rule(rule);
    let slots = model.all_slots();
    model
        .log_grad_slots(s, theta, action, &slots, estimator, clip_floor)
        .map(|(g, _)| g)
}

/// Default step for [`finite_difference_grad`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central differences of the exact `pi(action)`; shifts every gate of a slot.
pub fn finite_difference_grad(
    circuit: &ParameterizedCircuit,
    s: &[f64],
    theta: &[f64],
    partition: &ActionPartition,
    action: usize,
    h: f64,
) -> Result<GradientVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let model = PolicyModel::new(circuit, partition)?;
    model.check_action(action)?;
    let mut shifted = theta.to_vec();
    let mut values = Vec::with_capacity(theta.len());
    for l in 0..theta.len() {
        shifted[l] = theta[l] + h;
        let plus = model.policy(s, &shifted, Estimator::Exact)?.probs[action];
        shifted[l] = theta[l] - h;
        let minus = model.policy(s, &shifted, Estimator::Exact)?.probs[action];
        shifted[l] = theta[l];
        values.push((plus - minus) / (2.0 * h));
    }
    Ok(GradientVector {
        evals_used: 2 * theta.len() as u64,
        values,
    })
}

/// Tolerance on marginal factorization for [`product_log_decomposition`].
pub const PRODUCT_TOL: f64 = 1e-8;

/// Single-qubit marginals `p_i(b)` of the computational-basis distribution.
pub fn qubit_marginals(psi: &StateVector) -> Vec<[f64; 2]> {
    let n = psi.n_qubits();
    let probs = basis_probabilities(psi);
    let mut marg = vec![[0.0; 2]; n];
    for (v, p) in probs.iter().enumerate() {
        for (q, m) in marg.iter_mut().enumerate() {
            m[(v >> (n - 1 - q)) & 1] += p;
        }
    }
    marg
}

/// Per-qubit `log p_i(a_i)` of a product state; the terms sum to `log pi(a)`.
pub fn product_log_decomposition(psi: &StateVector, index: usize) -> Result<Vec<f64>> {
    let n = psi.n_qubits();
    if index >> n != 0 {
        return Err(Error::InvalidArgument(format!(
            "basis index {index} out of range for {n} qubits"
        )));
    }
    let probs = basis_probabilities(psi);
    let marg = qubit_marginals(psi);
    let factor = |v: usize| -> f64 {
        (0..n).map(|q| marg[q][(v >> (n - 1 - q)) & 1]).product()
    };
    let worst = probs
        .iter()
        .enumerate()
        .map(|(v, p)| (p - factor(v)).abs())
        .fold(0.0, f64::max);
    if worst > PRODUCT_TOL {
        return Err(Error::NotProductState(worst));
    }
    Ok((0..n)
        .map(|q| marg[q][(index >> (n - 1 - q)) & 1].ln())
        .collect())
}
