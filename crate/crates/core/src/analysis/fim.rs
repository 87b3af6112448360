use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::eigen::eigen_spectrum;
use crate::error::{Error, Result};
use crate::grad::{Estimator, PolicyModel};
use crate::policy::ActionPartition;
use crate::qsim::ParameterizedCircuit;
use crate::rng;

pub const DEFAULT_CONCENTRATION_THRESHOLD: f64 = 1e-3;

/// How the inner expectation over actions is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSampling {
    /// One action drawn from the policy per state sample.
    Sampled,
    /// Exact average over actions, `sum_a grad pi_a grad pi_a^T / pi_a`.
    #[default]
    Enumerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimResult {
    pub matrix: Vec<Vec<f64>>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub samples_used: usize,
}

impl FimResult {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Monte-Carlo Fisher information over agent states `s ~ U(-pi, pi)^n`.
pub fn fim(
    circuit: &ParameterizedCircuit,
    partition: &ActionPartition,
    theta: &[f64],
    state_samples: usize,
    action_sampling: ActionSampling,
    seed: u64,
    clip_floor: Option<f64>,
) -> Result<FimResult> {
    if state_samples == 0 {
        return Err(Error::InvalidArgument("FIM needs at least one state sample".into()));
    }
    let model = PolicyModel::new(circuit, partition)?;
    let k = circuit.n_params();
    let slots: Vec<usize> = (0..k).collect();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut r = rng::stream(seed, &[]);
    let floor = clip_floor.unwrap_or(0.0);
    for _ in 0..state_samples {
        let s: Vec<f64> = (0..circuit.n_features()).map(|_| r.random_range(-PI..PI)).collect();
        let jac = model.jacobian(&s, theta, &slots, Estimator::Exact)?;
        let mut accumulate = |a: usize, weight: f64| -> Result<()> {
            let denom = jac.policy.probs[a].max(floor);
            if denom <= 0.0 {
                return Err(Error::ZeroProbability { action: a });
            }
            let g: Vec<f64> = jac.rows.iter().map(|row| row[a] / denom).collect();
            for i in 0..k {
                let wi = weight * g[i];
                for j in i..k {
                    matrix[i][j] += wi * g[j];
                }
            }
            Ok(())
        };
        match action_sampling {
            ActionSampling::Sampled => {
                let a = jac.policy.sample(&mut r);
                accumulate(a, 1.0)?;
            }
            ActionSampling::Enumerated => {
                for a in 0..partition.n_actions() {
                    let p = jac.policy.probs[a];
                    if p > 0.0 {
                        accumulate(a, p)?;
                    }
                }
            }
        }
    }
    let norm = 1.0 / state_samples as f64;
    for i in 0..k {
        for j in i..k {
            matrix[i][j] *= norm;
            matrix[j][i] = matrix[i][j];
        }
    }
    let eigenvalues = eigen_spectrum(&matrix)?;
    Ok(FimResult { matrix, eigenvalues, samples_used: state_samples })
}

/// Fraction of eigenvalues with magnitude below `threshold`.
pub fn concentration_fraction(eigenvalues: &[f64], threshold: f64) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    eigenvalues.iter().filter(|l| l.abs() < threshold).count() as f64 / eigenvalues.len() as f64
}
