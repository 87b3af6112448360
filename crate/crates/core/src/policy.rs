//! Born policies: partitions of the computational basis into actions.
//!
//! A full partition (contiguous or recursive parity) assigns every basis
//! state to exactly one action, so `pi(a) = sum_{v in V_a} |psi_v|^2`. The
//! action-projector scheme keeps one basis state per action and renormalizes
//! over the kept states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{basis_probabilities, Histogram, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionScheme {
    /// Action = integer value of the first `log2 |A|` bits.
    Contiguous,
    /// Recursive parity partition; the global XOR of all bits for `|A| = 2`.
    #[serde(alias = "parity")]
    ParityRecursive,
    /// One basis state per action, renormalized.
    ActionProjector,
}

impl PartitionScheme {
    pub fn name(self) -> &'static str {
        match self {
            PartitionScheme::Contiguous => "contiguous",
            PartitionScheme::ParityRecursive => "parity",
            PartitionScheme::ActionProjector => "action-projector",
        }
    }
}

/// Config-file form of a partition: scheme name, `|A|`, optional projector list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub scheme: PartitionScheme,
    pub n_actions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projectors: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionPartition {
    scheme: PartitionScheme,
    n_qubits: usize,
    n_actions: usize,
    projector_states: Vec<usize>,
}

impl ActionPartition {
    /// Builds a partition, choosing default projector states for the
    /// action-projector scheme (see [`ActionPartition::default_projectors`]).
    pub fn new(scheme: PartitionScheme, n_qubits: usize, n_actions: usize) -> Result<Self> {
        match scheme {
            PartitionScheme::ActionProjector => {
                let states = Self::default_projectors(n_qubits, n_actions)?;
                Self::action_projector(n_qubits, states)
            }
            _ => Self::full(scheme, n_qubits, n_actions),
        }
    }

    pub fn contiguous(n_qubits: usize, n_actions: usize) -> Result<Self> {
        Self::full(PartitionScheme::Contiguous, n_qubits, n_actions)
    }

    pub fn parity(n_qubits: usize, n_actions: usize) -> Result<Self> {
        Self::full(PartitionScheme::ParityRecursive, n_qubits, n_actions)
    }

    fn full(scheme: PartitionScheme, n_qubits: usize, n_actions: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if n_actions < 2 || !n_actions.is_power_of_two() {
            return Err(Error::InvalidPartition(format!(
                "{} partitions need |A| to be a power of two >= 2, got {n_actions}",
                scheme.name()
            )));
        }
        if n_actions.trailing_zeros() as usize > n_qubits {
            return Err(Error::InvalidPartition(format!(
                "|A| = {n_actions} exceeds 2^{n_qubits} basis states"
            )));
        }
        Ok(Self {
            scheme,
            n_qubits,
            n_actions,
            projector_states: Vec::new(),
        })
    }

    pub fn action_projector(n_qubits: usize, states: Vec<usize>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if states.len() < 2 {
            return Err(Error::InvalidPartition(
                "action-projector partitions need at least two actions".into(),
            ));
        }
        let dim = 1usize << n_qubits;
        let mut seen = vec![false; dim];
        for &v in &states {
            if v >= dim {
                return Err(Error::InvalidPartition(format!(
                    "projector state {v} out of range for {n_qubits} qubits"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPartition(format!(
                    "projector state {v} listed twice"
                )));
            }
        }
        Ok(Self {
            scheme: PartitionScheme::ActionProjector,
            n_qubits,
            n_actions: states.len(),
            projector_states: states,
        })
    }

    /// Evenly spaced basis states `floor(i (2^n - 1) / (|A| - 1))`: all-zeros
    /// and all-ones for `|A| = 2`, every basis state for `|A| = 2^n`.
    pub fn default_projectors(n_qubits: usize, n_actions: usize) -> Result<Vec<usize>> {
        check_qubits(n_qubits)?;
        let last = (1usize << n_qubits) - 1;
        if n_actions < 2 || n_actions > last + 1 {
            return Err(Error::InvalidPartition(format!(
                "action-projector |A| must be in 2..={}, got {n_actions}",
                last + 1
            )));
        }
        Ok((0..n_actions)
            .map(|i| i * last / (n_actions - 1))
            .collect())
    }

    pub fn from_spec(n_qubits: usize, spec: &PartitionSpec) -> Result<Self> {
        match (&spec.projectors, spec.scheme) {
            (Some(states), PartitionScheme::ActionProjector) => {
                if states.len() != spec.n_actions {
                    return Err(Error::InvalidPartition(format!(
                        "{} projectors listed for |A| = {}",
                        states.len(),
                        spec.n_actions
                    )));
                }
                Self::action_projector(n_qubits, states.clone())
            }
            (Some(_), scheme) => Err(Error::InvalidPartition(format!(
                "projector list given for the {} scheme",
                scheme.name()
            ))),
            (None, scheme) => Self::new(scheme, n_qubits, spec.n_actions),
        }
    }

    pub fn to_spec(&self) -> PartitionSpec {
        PartitionSpec {
            scheme: self.scheme,
            n_actions: self.n_actions,
            projectors: (self.scheme == PartitionScheme::ActionProjector)
                .then(|| self.projector_states.clone()),
        }
    }

    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn projector_states(&self) -> &[usize] {
        &self.projector_states
    }

    /// True when every basis state belongs to some action.
    pub fn is_full(&self) -> bool {
        self.scheme != PartitionScheme::ActionProjector
    }

    /// Unnormalized projector expectations `<P_a>` from basis probabilities.
    /// For full partitions these already sum to one.
    pub fn action_masses(&self, basis_probs: &[f64]) -> Vec<f64> {
        match self.scheme {
            PartitionScheme::ActionProjector => self
                .projector_states
                .iter()
                .map(|&v| basis_probs[v])
                .collect(),
            _ => {
                let mut mass = vec![0.0; self.n_actions];
                for (v, p) in basis_probs.iter().enumerate() {
                    mass[self.assign_unchecked(v)] += p;
                }
                mass
            }
        }
    }

    fn assign_unchecked(&self, index: usize) -> usize {
        let n = self.n_qubits;
        let bits = self.n_actions.trailing_zeros() as usize;
        match self.scheme {
            PartitionScheme::Contiguous => index >> (n - bits),
            PartitionScheme::ParityRecursive => {
                // Unrolling the recursion: with m = log2|A| - 1 levels below
                // the base case, the first m bits are copied verbatim as the
                // high action bits and the lowest action bit is the parity of
                // bits m..n-1.
                let m = bits - 1;
                let tail = index & ((1usize << (n - m)) - 1);
                let prefix = index >> (n - m);
                (prefix << 1) | (tail.count_ones() as usize & 1)
            }
            PartitionScheme::ActionProjector => unreachable!("no total assignment"),
        }
    }
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > crate::qsim::MAX_QUBITS {
        return Err(Error::InvalidPartition(format!(
            "unsupported qubit count {n_qubits}"
        )));
    }
    Ok(())
}

/// Maps a measured basis index to its action under a full partition.
pub fn assign_action(index: usize, partition: &ActionPartition) -> Result<usize> {
    if !partition.is_full() {
        return Err(Error::InvalidPartition(
            "action-projector partitions have no total assignment".into(),
        ));
    }
    if index >> partition.n_qubits != 0 {
        return Err(Error::InvalidArgument(format!(
            "basis index {index} out of range for {} qubits",
            partition.n_qubits
        )));
    }
    Ok(partition.assign_unchecked(index))
}

/// Measurement locality (number of qubits the action observables touch).
pub fn locality(partition: &ActionPartition) -> usize {
    match partition.scheme {
        PartitionScheme::Contiguous => partition.n_actions.trailing_zeros() as usize,
        PartitionScheme::ParityRecursive | PartitionScheme::ActionProjector => partition.n_qubits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Exact,
    Shots(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    pub probs: Vec<f64>,
    pub source: Source,
    /// Floor applied to the probability wherever it appears in a gradient
    /// denominator. The probabilities themselves are never altered.
    pub clip_floor: Option<f64>,
}

impl PolicyDistribution {
    pub fn n_actions(&self) -> usize {
        self.probs.len()
    }

    /// Draws one action by inverse-CDF sampling.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> usize {
        let total: f64 = self.probs.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_nonzero = a;
                acc += p;
                if u < acc {
                    return a;
                }
            }
        }
        last_nonzero
    }

    /// Probability used in a log-gradient denominator for action `a`.
    pub fn denominator(&self, a: usize) -> f64 {
        match self.clip_floor {
            Some(floor) => self.probs[a].max(floor),
            None => self.probs[a],
        }
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = a;
            }
        }
        best
    }
}

/// Normalizes raw projector masses into a policy.
pub(crate) fn normalize_masses(
    partition: &ActionPartition,
    mut masses: Vec<f64>,
    source: Source,
) -> Result<PolicyDistribution> {
    if !partition.is_full() {
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProjectorMass);
        }
        masses.iter_mut().for_each(|m| *m /= total);
    }
    Ok(PolicyDistribution {
        probs: masses,
        source,
        clip_floor: None,
    })
}

/// Exact Born policy `pi(a|s,theta) = <P_a>` of a prepared state.
pub fn born_policy(psi: &StateVector, partition: &ActionPartition) -> Result<PolicyDistribution> {
    if psi.n_qubits() != partition.n_qubits {
        return Err(Error::DimensionMismatch {
            what: "partition qubits",
            expected: partition.n_qubits,
            got: psi.n_qubits(),
        });
    }
    let masses = partition.action_masses(&basis_probabilities(psi));
    normalize_masses(partition, masses, Source::Exact)
}

/// Policy estimated from measurement counts.
pub fn born_policy_from_shots(
    histogram: &Histogram,
    partition: &ActionPartition,
) -> Result<PolicyDistribution> {
    if histogram.n_qubits != partition.n_qubits {
        return Err(Error::DimensionMismatch {
            what: "partition qubits",
            expected: partition.n_qubits,
            got: histogram.n_qubits,
        });
    }
    let total = histogram.total();
    if total == 0 {
        return Err(Error::InvalidArgument("histogram is empty".into()));
    }
    let mut counts = vec![0u64; partition.n_actions];
    match partition.scheme {
        PartitionScheme::ActionProjector => {
            for (a, &v) in partition.projector_states.iter().enumerate() {
                counts[a] = histogram.get(v);
            }
        }
        _ => {
            for (&v, &c) in &histogram.counts {
                counts[assign_action(v, partition)?] += c;
            }
        }
    }
    let kept: u64 = counts.iter().sum();
    if kept == 0 {
        return Err(Error::ZeroProjectorMass);
    }
    Ok(PolicyDistribution {
        probs: counts.iter().map(|&c| c as f64 / kept as f64).collect(),
        source: Source::Shots(total),
        clip_floor: None,
    })
}

/// Attaches a probability floor for gradient denominators.
pub fn clip(dist: &PolicyDistribution, floor: f64) -> Result<PolicyDistribution> {
    let uniform = 1.0 / dist.n_actions() as f64;
    if !(floor > 0.0 && floor < uniform) {
        return Err(Error::InvalidArgument(format!(
            "clip floor must lie in (0, 1/|A| = {uniform}), got {floor}"
        )));
    }
    Ok(PolicyDistribution {
        clip_floor: Some(floor),
        ..dist.clone()
    })
}

/// Numerically stable softmax `exp(beta x_a) / sum exp(beta x_a')`.
pub fn softmax_policy(expectations: &[f64], beta: f64) -> Result<PolicyDistribution> {
    if expectations.is_empty() {
        return Err(Error::InvalidArgument("softmax over zero actions".into()));
    }
    if expectations.iter().any(|x| !x.is_finite()) || !beta.is_finite() {
        return Err(Error::InvalidArgument("non-finite softmax input".into()));
    }
    let max = expectations
        .iter()
        .map(|x| beta * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = expectations.iter().map(|x| (beta * x - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(PolicyDistribution {
        probs: weights.into_iter().map(|w| w / total).collect(),
        source: Source::Exact,
        clip_floor: None,
    })
}

/// Product of Pauli-Z operators on a set of qubits, times a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTerm {
    pub coefficient: f64,
    pub qubits: Vec<usize>,
}

/// Sum of Z-product terms; the action preference `O_a` of a softmax policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub terms: Vec<ZTerm>,
}

impl Observable {
    pub fn single_z(qubit: usize) -> Self {
        Self {
            terms: vec![ZTerm {
                coefficient: 1.0,
                qubits: vec![qubit],
            }],
        }
    }

    pub fn global_z(n_qubits: usize) -> Self {
        Self {
            terms: vec![ZTerm {
                coefficient: 1.0,
                qubits: (0..n_qubits).collect(),
            }],
        }
    }

    /// `<O>` computed from computational-basis probabilities.
    pub fn expectation(&self, basis_probs: &[f64], n_qubits: usize) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let mask = term
                    .qubits
                    .iter()
                    .fold(0usize, |m, &q| m | 1 << (n_qubits - 1 - q));
                let e: f64 = basis_probs
                    .iter()
                    .enumerate()
                    .map(|(v, p)| if (v & mask).count_ones() % 2 == 0 { *p } else { -*p })
                    .sum();
                term.coefficient * e
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxPolicySpec {
    pub beta: f64,
    pub observables: Vec<Observable>,
}

impl SoftmaxPolicySpec {
    pub fn new(beta: f64, observables: Vec<Observable>) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be finite and positive, got {beta}"
            )));
        }
        if observables.len() < 2 {
            return Err(Error::InvalidArgument("softmax needs >= 2 actions".into()));
        }
        Ok(Self { beta, observables })
    }

    pub fn policy(&self, psi: &StateVector) -> Result<PolicyDistribution> {
        let probs = basis_probabilities(psi);
        let n = psi.n_qubits();
        for obs in &self.observables {
            if let Some(q) = obs.terms.iter().flat_map(|t| &t.qubits).find(|&&q| q >= n) {
                return Err(Error::InvalidArgument(format!(
                    "observable acts on qubit {q} of a {n}-qubit state"
                )));
            }
        }
        let expectations: Vec<f64> = self
            .observables
            .iter()
            .map(|o| o.expectation(&probs, n))
            .collect();
        softmax_policy(&expectations, self.beta)
    }
}
