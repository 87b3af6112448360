use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grad::{Estimator, PolicyModel, ShiftRule};
use crate::policy::{ActionPartition, PartitionScheme};
use crate::qsim::{build_ansatz, AnsatzKind, AnsatzSpec, ParameterizedCircuit};
use crate::rng::{self, derive_seed};

/// Body depth as a function of the qubit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum DepthRule {
    Fixed { depth: usize },
    /// `min(n^2, cap)`
    Quadratic { cap: usize },
    /// `ceil(log2 n)`, at least 1
    Log2Ceil,
}

impl DepthRule {
    pub fn depth(self, n: usize) -> usize {
        match self {
            DepthRule::Fixed { depth } => depth,
            DepthRule::Quadratic { cap } => (n * n).min(cap),
            DepthRule::Log2Ceil => (n.next_power_of_two().trailing_zeros() as usize).max(1),
        }
    }
}

/// Action-set sizes swept at each qubit count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ActionRule {
    /// `{2^i : 1 <= i <= n}`
    PowersOfTwo,
    /// `|A| = n`
    EqualsN,
    /// `|A| = 2^n`
    TwoPowN,
    Fixed { sizes: Vec<usize> },
}

impl ActionRule {
    pub fn sizes(&self, n: usize) -> Vec<usize> {
        match self {
            ActionRule::PowersOfTwo => (1..=n).map(|i| 1usize << i).collect(),
            ActionRule::EqualsN => vec![n],
            ActionRule::TwoPowN => vec![1usize << n],
            ActionRule::Fixed { sizes } => sizes.clone(),
        }
    }
}

/// Probability floor used in gradient denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ClipRule {
    None,
    /// `1 / n^2`
    InverseSquare,
    Fixed { floor: f64 },
}

impl ClipRule {
    pub fn floor(self, n: usize) -> Option<f64> {
        match self {
            ClipRule::None => None,
            ClipRule::InverseSquare => Some(1.0 / (n * n) as f64),
            ClipRule::Fixed { floor } => Some(floor),
        }
    }

    pub fn label(self) -> String {
        match self {
            ClipRule::None => "none".into(),
            ClipRule::InverseSquare => "1/n^2".into(),
            ClipRule::Fixed { floor } => format!("{floor}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "slot")]
pub enum ProbeSlot {
    /// First slot of the middle body layer.
    #[default]
    Middle,
    Index { index: usize },
}

impl ProbeSlot {
    pub fn resolve(self, circuit: &ParameterizedCircuit) -> Result<usize> {
        let slot = match self {
            ProbeSlot::Middle => circuit.middle_slot(),
            ProbeSlot::Index { index } => index,
        };
        if slot >= circuit.n_params() {
            return Err(Error::InvalidArgument(format!(
                "probed slot {slot} out of range for {} parameters",
                circuit.n_params()
            )));
        }
        Ok(slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceScanConfig {
    pub ansatz: AnsatzKind,
    pub depth: DepthRule,
    pub n_list: Vec<usize>,
    pub actions: ActionRule,
    pub scheme: PartitionScheme,
    /// `None` uses exact probabilities.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default = "default_clip")]
    pub clip: ClipRule,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub probe: ProbeSlot,
    pub seed: u64,
}

fn default_clip() -> ClipRule {
    ClipRule::None
}
fn default_ensemble() -> usize {
    2000
}

impl VarianceScanConfig {
    pub fn new(
        ansatz: AnsatzKind,
        depth: DepthRule,
        n_list: Vec<usize>,
        actions: ActionRule,
        scheme: PartitionScheme,
        seed: u64,
    ) -> Self {
        Self {
            ansatz,
            depth,
            n_list,
            actions,
            scheme,
            shots: None,
            clip: ClipRule::None,
            ensemble_size: default_ensemble(),
            probe: ProbeSlot::Middle,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::InvalidArgument("ensemble_size must be >= 2".into()));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n_list must be non-empty and strictly ascending".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be >= 1".into()));
        }
        if let ClipRule::Fixed { floor } = self.clip {
            if !(floor > 0.0 && floor < 1.0) {
                return Err(Error::InvalidArgument(format!("clip floor {floor} outside (0, 1)")));
            }
        }
        for &n in &self.n_list {
            let circuit = build_ansatz(&self.ansatz_spec(n, Some(0)))?;
            self.probe.resolve(&circuit)?;
            for a in self.actions.sizes(n) {
                ActionPartition::new(self.scheme, n, a)?;
            }
        }
        Ok(())
    }

    fn ansatz_spec(&self, n: usize, seed: Option<u64>) -> AnsatzSpec {
        AnsatzSpec {
            kind: self.ansatz,
            n_qubits: n,
            depth: self.depth.depth(n),
            seed: if self.ansatz.needs_seed() { seed } else { None },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Large-sample standard error of `variance`.
    pub stderr: f64,
    pub count: usize,
}

/// Mean, unbiased variance and `sqrt((m4 - s^4) / N)` for the variance error.
pub fn sample_moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    if n < 2 {
        return Moments { mean: xs.first().copied().unwrap_or(0.0), variance: 0.0, stderr: 0.0, count: n };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let variance = m2 * nf / (nf - 1.0);
    Moments {
        mean,
        variance,
        stderr: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        count: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub n_qubits: usize,
    pub n_actions: usize,
    pub slot: usize,
    pub moments: Moments,
    /// Draws discarded because the sampled action had zero probability.
    pub skipped: usize,
}

/// Ensemble variance of `d log pi(a|s,theta) / d theta_slot` with `s`, `theta`
/// uniform on `[-pi, pi)` and `a` drawn from the policy on every draw.
pub fn log_grad_variance(config: &VarianceScanConfig, n: usize, n_actions: usize) -> Result<VarianceEstimate> {
    let partition = ActionPartition::new(config.scheme, n, n_actions)?;
    let fixed = build_ansatz(&config.ansatz_spec(n, Some(derive_seed(config.seed, &[n as u64]))))?;
    let slot = config.probe.resolve(&fixed)?;
    let floor = config.clip.floor(n);
    let cell_seed = derive_seed(config.seed, &[n as u64, n_actions as u64]);

    let draws: Vec<Option<f64>> = (0..config.ensemble_size as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let owned;
            let circuit = if config.ansatz.needs_seed() {
                owned = build_ansatz(&config.ansatz_spec(n, Some(derive_seed(cell_seed, &[i, 1]))))?;
                &owned
            } else {
                &fixed
            };
            let mut r = rng::stream(cell_seed, &[i]);
            let s: Vec<f64> = (0..n).map(|_| r.random_range(-PI..PI)).collect();
            let theta: Vec<f64> = (0..circuit.n_params()).map(|_| r.random_range(-PI..PI)).collect();
            let estimator = match config.shots {
                None => Estimator::Exact,
                Some(shots) => Estimator::Shots { shots, seed: derive_seed(cell_seed, &[i, 2]) },
            };
            let model = PolicyModel::new(circuit, &partition)?.with_rule(ShiftRule::default());
            let jac = match model.jacobian(&s, &theta, &[slot], estimator) {
                Ok(j) => j,
                Err(Error::ZeroProjectorMass) => return Ok(None),
                Err(e) => return Err(e),
            };
            let a = jac.policy.sample(&mut r);
            let denom = jac.policy.probs[a].max(floor.unwrap_or(0.0));
            Ok((denom > 0.0).then(|| jac.rows[0][a] / denom))
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = draws.iter().filter_map(|d| *d).collect();
    let skipped = draws.len() - values.len();
    if values.len() < 2 {
        return Err(Error::ZeroProbability { action: usize::MAX });
    }
    Ok(VarianceEstimate {
        n_qubits: n,
        n_actions,
        slot,
        moments: sample_moments(&values),
        skipped,
    })
}
