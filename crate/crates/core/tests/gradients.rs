use qpg::grad::{
    finite_difference_grad, log_policy_grad, product_log_decomposition, qubit_marginals,
    shift_grad_action_prob, Estimator, ShiftRule, DEFAULT_FD_STEP,
};
use qpg::policy::{ActionPartition, PartitionScheme};
use qpg::qsim::{build_ansatz, run, AnsatzKind, AnsatzSpec, GateShift};
use qpg::rng;
use rand::Rng;
use std::f64::consts::PI;

const FAMILIES: [AnsatzKind; 3] = [
    AnsatzKind::SimplifiedTwoDesign,
    AnsatzKind::StronglyEntanglingLayers,
    AnsatzKind::RandomPauliCz,
];
const SCHEMES: [PartitionScheme; 3] = [
    PartitionScheme::Contiguous,
    PartitionScheme::ParityRecursive,
    PartitionScheme::ActionProjector,
];

fn angles(r: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| r.random_range(-PI..PI)).collect()
}

#[test]
fn shift_matches_finite_differences_on_random_circuits() {
    let mut r = rng::stream(2024, &[1]);
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let kind = FAMILIES[case as usize % 3];
        let scheme = SCHEMES[(case / 3) as usize % 3];
        let n = r.random_range(2..=6usize);
        let depth = r.random_range(1..=3usize);
        let circuit = build_ansatz(&AnsatzSpec::seeded(kind, n, depth, case)).unwrap();
        let n_actions = 1usize << r.random_range(1..=n.min(3));
        let partition = ActionPartition::new(scheme, n, n_actions).unwrap();
        let s = angles(&mut r, n);
        let theta = angles(&mut r, circuit.n_params());
        let action = r.random_range(0..n_actions);
        let sg = shift_grad_action_prob(&circuit, &s, &theta, &partition, action, ShiftRule::default(), Estimator::Exact)
            .unwrap();
        let fd = finite_difference_grad(&circuit, &s, &theta, &partition, action, DEFAULT_FD_STEP).unwrap();
        for (x, y) in sg.values.iter().zip(&fd.values) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 1e-6, "max deviation {worst}");
}

#[test]
fn evals_used_counts_two_per_parameter() {
    let circuit = build_ansatz(&AnsatzSpec::seeded(AnsatzKind::RandomPauliCz, 4, 3, 7)).unwrap();
    let partition = ActionPartition::contiguous(4, 4).unwrap();
    let theta = vec![0.3; circuit.n_params()];
    let g = shift_grad_action_prob(&circuit, &[0.1; 4], &theta, &partition, 2, ShiftRule::default(), Estimator::Exact)
        .unwrap();
    assert_eq!(g.values.len(), circuit.n_params());
    assert_eq!(g.evals_used, 2 * circuit.n_params() as u64);
}

#[test]
fn full_partition_gradients_sum_to_zero() {
    let mut r = rng::stream(5, &[]);
    for scheme in [PartitionScheme::Contiguous, PartitionScheme::ParityRecursive] {
        for kind in FAMILIES {
            let n = 4;
            let circuit = build_ansatz(&AnsatzSpec::seeded(kind, n, 2, 3)).unwrap();
            let partition = ActionPartition::new(scheme, n, 8).unwrap();
            let s = angles(&mut r, n);
            let theta = angles(&mut r, circuit.n_params());
            let mut total = vec![0.0; circuit.n_params()];
            for a in 0..8 {
                let g = shift_grad_action_prob(&circuit, &s, &theta, &partition, a, ShiftRule::default(), Estimator::Exact)
                    .unwrap();
                total.iter_mut().zip(&g.values).for_each(|(t, v)| *t += v);
            }
            assert!(total.iter().all(|t| t.abs() < 1e-9), "{total:?}");
        }
    }
}

#[test]
fn global_cost_gradient_closed_form() {
    // RY(theta_i) on |0> gives p_i(0) = cos^2(phi_i) with phi_i = theta_i / 2, so
    // C_G(phi) = 1 - pi(0...0) and dC_G/dphi_i = -2 dpi(0)/dtheta_i.
    let n = 4;
    let body = (0..n)
        .map(|q| qpg::qsim::Gate::ry(q, qpg::qsim::Angle::Slot(q)))
        .collect();
    let circuit = qpg::qsim::ParameterizedCircuit::new(n, vec![], body).unwrap();
    let partition = ActionPartition::contiguous(n, 1 << n).unwrap();
    let theta = [0.4, -1.1, 2.3, 0.9];
    let phi: Vec<f64> = theta.iter().map(|t| t / 2.0).collect();
    let sg = shift_grad_action_prob(&circuit, &[0.0; 4], &theta, &partition, 0, ShiftRule::default(), Estimator::Exact)
        .unwrap();
    for i in 0..n {
        let closed = (2.0 * phi[i]).sin()
            * (0..n).filter(|&j| j != i).map(|j| phi[j].cos().powi(2)).product::<f64>();
        assert!((-2.0 * sg.values[i] - closed).abs() < 1e-12);
    }
}

#[test]
fn constant_landscape_has_zero_gradient() {
    // An RZ on |0> only changes the phase.
    let circuit = qpg::qsim::ParameterizedCircuit::new(
        2,
        vec![],
        vec![qpg::qsim::Gate::rz(0, qpg::qsim::Angle::Slot(0)), qpg::qsim::Gate::rz(1, qpg::qsim::Angle::Slot(1))],
    )
    .unwrap();
    let partition = ActionPartition::contiguous(2, 4).unwrap();
    let fd = finite_difference_grad(&circuit, &[0.0; 2], &[0.5, 1.5], &partition, 0, DEFAULT_FD_STEP).unwrap();
    assert!(fd.values.iter().all(|v| v.abs() < 1e-10));
    let lg = log_policy_grad(&circuit, &[0.0; 2], &[0.5, 1.5], &partition, 0, ShiftRule::default(), Estimator::Exact, None)
        .unwrap();
    assert!(lg.values.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn shot_noise_scales_as_inverse_sqrt() {
    let circuit = build_ansatz(&AnsatzSpec::seeded(AnsatzKind::RandomPauliCz, 3, 2, 11)).unwrap();
    let partition = ActionPartition::contiguous(3, 2).unwrap();
    let s = [0.2, -0.7, 1.1];
    let theta: Vec<f64> = (0..circuit.n_params()).map(|i| 0.37 * i as f64 - 1.0).collect();
    let reps = 300u64;
    let std_at = |shots: u64| {
        let vals: Vec<f64> = (0..reps)
            .map(|seed| {
                shift_grad_action_prob(&circuit, &s, &theta, &partition, 0, ShiftRule::default(), Estimator::Shots { shots, seed })
                    .unwrap()
                    .values[0]
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
    };
    let stds = [std_at(100), std_at(1_000), std_at(10_000)];
    for w in stds.windows(2) {
        let ratio = w[0] / w[1];
        let ideal = 10f64.sqrt();
        assert!(ratio > ideal / 2.0 && ratio < ideal * 2.0, "{stds:?}");
    }
}

#[test]
fn product_state_log_gradient_is_additive() {
    let rule = ShiftRule::default();
    let mut r = rng::stream(77, &[]);
    for n in 1..=6 {
        let circuit = build_ansatz(&AnsatzSpec::seeded(AnsatzKind::ProductStateShared, n, 3, n as u64)).unwrap();
        let partition = ActionPartition::new(PartitionScheme::ActionProjector, n, 1 << n).unwrap();
        let s = angles(&mut r, n);
        let theta = angles(&mut r, circuit.n_params());
        let a = r.random_range(0..1usize << n);

        let psi = run(&circuit, &s, &theta).unwrap();
        let terms = product_log_decomposition(&psi, a).unwrap();
        let pi = qpg::qsim::basis_probabilities(&psi)[a];
        assert!((terms.iter().sum::<f64>() - pi.ln()).abs() < 1e-8);

        let lg = log_policy_grad(&circuit, &s, &theta, &partition, a, rule, Estimator::Exact, None).unwrap();
        for slot in 0..circuit.n_params() {
            // Per-qubit marginal log-derivatives, each by its own shift rule.
            let mut d_marg = vec![0.0; n];
            for &gate in circuit.gates_for_slot(slot) {
                let plus = circuit.run_shifted(&s, &theta, Some(GateShift { gate, delta: rule.alpha })).unwrap();
                let minus = circuit.run_shifted(&s, &theta, Some(GateShift { gate, delta: -rule.alpha })).unwrap();
                let (mp, mm) = (qubit_marginals(&plus), qubit_marginals(&minus));
                for q in 0..n {
                    let bit = (a >> (n - 1 - q)) & 1;
                    d_marg[q] += rule.scale * (mp[q][bit] - mm[q][bit]);
                }
            }
            let marg = qubit_marginals(&psi);
            let sum: f64 = (0..n)
                .map(|q| d_marg[q] / marg[q][(a >> (n - 1 - q)) & 1])
                .sum();
            assert!((lg.values[slot] - sum).abs() < 1e-8, "n={n} slot={slot}");
        }
    }
}
