use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::variance::sample_moments;
use crate::error::{Error, Result};
use crate::grad::{qubit_marginals, Estimator, PolicyModel};
use crate::policy::{ActionPartition, PartitionScheme};
use crate::qsim::{build_ansatz, AnsatzKind, AnsatzSpec};
use crate::rng::{self, derive_seed};

/// Gradient statistics of the shared middle-layer parameter over random
/// product-state circuits, for the log-probability and plain-probability costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductStateStats {
    pub n_qubits: usize,
    pub layers: usize,
    pub ensemble: usize,
    pub log_mean: f64,
    pub log_var: f64,
    pub log_abs_mean: f64,
    pub prob_mean: f64,
    pub prob_var: f64,
    pub prob_abs_mean: f64,
}

const FEATURES: u64 = 0;
const PARAMS: u64 = 1;
const CIRCUIT: u64 = 2;
const ACTION: u64 = 3;

/// One `(n, layers)` cell. Each draw builds a circuit with random Pauli
/// rotations, samples `s` and `theta` uniformly and an action from the policy
/// over all `2^n` basis states.
///
/// All per-qubit randomness (Pauli choice, feature, action bit) is keyed by
/// draw and qubit index but not by `n`, so cells of different widths share
/// common random numbers and differences along `n` are estimated with low
/// noise. Because the state is a product state, drawing each action bit from
/// its qubit marginal samples exactly from the policy.
pub fn product_state_cell(n: usize, layers: usize, ensemble: usize, seed: u64) -> Result<ProductStateStats> {
    if ensemble < 2 {
        return Err(Error::InvalidArgument("ensemble must be >= 2".into()));
    }
    let partition = ActionPartition::new(PartitionScheme::ActionProjector, n, 1 << n)?;
    let pairs: Vec<(f64, f64)> = (0..ensemble as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let draw = derive_seed(seed, &[layers as u64, i]);
            let circuit = build_ansatz(&AnsatzSpec::seeded(
                AnsatzKind::ProductStateShared,
                n,
                layers,
                derive_seed(draw, &[CIRCUIT]),
            ))?;
            let s: Vec<f64> = (0..n as u64)
                .map(|q| rng::stream(draw, &[FEATURES, q]).random_range(-PI..PI))
                .collect();
            let mut pr = rng::stream(draw, &[PARAMS]);
            let theta: Vec<f64> = (0..circuit.n_params()).map(|_| pr.random_range(-PI..PI)).collect();

            let psi = circuit.run_shifted(&s, &theta, None)?;
            let marg = qubit_marginals(&psi);
            let a = (0..n).fold(0usize, |acc, q| {
                let u: f64 = rng::stream(draw, &[ACTION, q as u64]).random();
                (acc << 1) | usize::from(u >= marg[q][0])
            });

            let model = PolicyModel::new(&circuit, &partition)?;
            let jac = model.jacobian(&s, &theta, &[circuit.middle_slot()], Estimator::Exact)?;
            let d = jac.rows[0][a];
            let p = jac.policy.probs[a];
            if p <= 0.0 {
                return Err(Error::ZeroProbability { action: a });
            }
            Ok((d / p, d))
        })
        .collect::<Result<_>>()?;
    let logs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let probs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (lm, pm) = (sample_moments(&logs), sample_moments(&probs));
    let abs_mean = |xs: &[f64]| xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
    Ok(ProductStateStats {
        n_qubits: n,
        layers,
        ensemble,
        log_mean: lm.mean,
        log_var: lm.variance,
        log_abs_mean: abs_mean(&logs),
        prob_mean: pm.mean,
        prob_var: pm.variance,
        prob_abs_mean: abs_mean(&probs),
    })
}
