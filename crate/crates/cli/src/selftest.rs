//! Fast invariant checks run by `qpg selftest`. Each check is deterministic.

use std::f64::consts::PI;

use qpg::analysis::jacobi_eigen;
use qpg::grad::{finite_difference_grad, shift_grad_action_prob, Estimator, PolicyModel, ShiftRule, DEFAULT_FD_STEP};
use qpg::policy::{assign_action, ActionPartition, PartitionScheme};
use qpg::qsim::{build_ansatz, AnsatzKind, AnsatzSpec};
use qpg::rng;
use rand::Rng as _;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const SEED: u64 = 0x5e1f;

pub fn run_all() -> Result<Vec<Check>, CliError> {
    Ok(vec![
        shift_rule_matches_finite_difference()?,
        partitions_cover_basis()?,
        policies_normalized()?,
        jacobi_reconstructs()?,
        shots_reproducible()?,
    ])
}

fn uniform(r: &mut qpg::rng::Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-PI..PI)).collect()
}

fn shift_rule_matches_finite_difference() -> Result<Check, CliError> {
    const TOL: f64 = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let circuit = build_ansatz(&AnsatzSpec::seeded(AnsatzKind::RandomPauliCz, 3, 3, rng::derive_seed(SEED, &[i])))?;
        let mut r = rng::stream(SEED, &[1, i]);
        let s = uniform(&mut r, 3);
        let theta = uniform(&mut r, circuit.n_params());
        for partition in [
            ActionPartition::contiguous(3, 4)?,
            ActionPartition::parity(3, 4)?,
            ActionPartition::new(PartitionScheme::ActionProjector, 3, 4)?,
        ] {
            for a in 0..4 {
                let g = shift_grad_action_prob(&circuit, &s, &theta, &partition, a, ShiftRule::default(), Estimator::Exact)?;
                let fd = finite_difference_grad(&circuit, &s, &theta, &partition, a, DEFAULT_FD_STEP)?;
                for (x, y) in g.values.iter().zip(&fd.values) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Ok(Check {
        name: "shift-rule",
        passed: worst < TOL,
        detail: format!("max |shift - fd| = {worst:.2e} over 20 circuits (tol {TOL:.0e})"),
    })
}

fn partitions_cover_basis() -> Result<Check, CliError> {
    let mut bad = Vec::new();
    for n in 1..=6 {
        for k in 1..=n {
            let a = 1usize << k;
            for scheme in [PartitionScheme::Contiguous, PartitionScheme::ParityRecursive] {
                let p = ActionPartition::new(scheme, n, a)?;
                let mut counts = vec![0usize; a];
                for i in 0..1usize << n {
                    counts[assign_action(i, &p)?] += 1;
                }
                if counts.iter().any(|&c| c != (1 << n) / a) {
                    bad.push(format!("{}:n={n},A={a}", scheme.name()));
                }
            }
        }
    }
    Ok(Check {
        name: "partition-cover",
        passed: bad.is_empty(),
        detail: if bad.is_empty() { "every cell holds 2^n/|A| basis states for n <= 6".into() } else { bad.join(" ") },
    })
}

fn policies_normalized() -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let circuit = build_ansatz(&AnsatzSpec::new(AnsatzKind::SimplifiedTwoDesign, 4, 2))?;
        let mut r = rng::stream(SEED, &[2, i]);
        let s = uniform(&mut r, 4);
        let theta = uniform(&mut r, circuit.n_params());
        for scheme in [PartitionScheme::Contiguous, PartitionScheme::ParityRecursive, PartitionScheme::ActionProjector] {
            let partition = ActionPartition::new(scheme, 4, 8)?;
            let model = PolicyModel::new(&circuit, &partition)?;
            let probs = model.policy(&s, &theta, Estimator::Exact)?.probs;
            worst = worst.max((probs.iter().sum::<f64>() - 1.0).abs());
            if probs.iter().any(|p| *p < 0.0) {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(Check {
        name: "policy-normalization",
        passed: worst < 1e-12,
        detail: format!("max |sum pi - 1| = {worst:.2e}"),
    })
}

fn jacobi_reconstructs() -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let k = 2 + (i as usize % 7);
        let mut r = rng::stream(SEED, &[3, i]);
        let mut m = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..=a {
                let x: f64 = r.random_range(-1.0..1.0);
                m[a][b] = x;
                m[b][a] = x;
            }
        }
        let e = jacobi_eigen(&m)?;
        for a in 0..k {
            for b in 0..k {
                let rebuilt: f64 = (0..k).map(|j| e.vectors[j][a] * e.values[j] * e.vectors[j][b]).sum();
                worst = worst.max((rebuilt - m[a][b]).abs());
            }
        }
    }
    Ok(Check {
        name: "jacobi",
        passed: worst < 1e-9,
        detail: format!("max |V diag(l) V^T - M| = {worst:.2e}"),
    })
}

fn shots_reproducible() -> Result<Check, CliError> {
    let circuit = build_ansatz(&AnsatzSpec::new(AnsatzKind::BanditLayer, 3, 2))?;
    let partition = ActionPartition::contiguous(3, 4)?;
    let model = PolicyModel::new(&circuit, &partition)?;
    let theta = uniform(&mut rng::stream(SEED, &[4]), circuit.n_params());
    let s = [0.0; 3];
    let est = Estimator::Shots { shots: 256, seed: 9 };
    let a = model.jacobian(&s, &theta, &[0, 1, 2], est)?;
    let b = model.jacobian(&s, &theta, &[0, 1, 2], est)?;
    let same = a.rows == b.rows && a.policy.probs == b.policy.probs;
    Ok(Check {
        name: "shot-determinism",
        passed: same,
        detail: if same { "repeated shot estimates are bit-identical".into() } else { "shot estimates differ between runs".into() },
    })
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
