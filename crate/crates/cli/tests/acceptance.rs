//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! the real stdout (bypassing the harness capture) and then asserts.
//!
//! Run with `cargo test -p qpg-cli --test acceptance`.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use qpg::agent::{
    discounted_returns, reinforce_gradient_against, return_upper_bound, train_bandit, variance_bound_rhs, BanditConfig,
    BanditEnv, PolicyContext, Step, TrainRecord, Trajectory,
};
use qpg::analysis::{
    concentration_fraction, fim, fit_scaling, log_grad_variance, product_state_cell, ActionRule, ActionSampling,
    ClipRule, DepthRule, ScalingModel, VarianceScanConfig,
};
use qpg::grad::{finite_difference_grad, Estimator, PolicyModel, DEFAULT_FD_STEP};
use qpg::policy::{assign_action, ActionPartition, PartitionScheme};
use qpg::qsim::{build_ansatz, AnsatzKind, AnsatzSpec};
use qpg::rng::{self, derive_seed};
use rand::Rng as _;

const SEED: u64 = 2024;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {id:>2} {:<4} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn uniform(r: &mut rng::Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-PI..PI)).collect()
}

fn variance(cfg: &VarianceScanConfig, n: usize, a: usize) -> f64 {
    log_grad_variance(cfg, n, a).unwrap().moments.variance
}

/// Number of positions where the sequence steps down.
fn inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

#[test]
fn c01_shift_rule_matches_finite_differences() {
    const TOL: f64 = 1e-6;
    const CIRCUITS: u64 = 100;
    let families = [AnsatzKind::SimplifiedTwoDesign, AnsatzKind::StronglyEntanglingLayers, AnsatzKind::RandomPauliCz];
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for i in 0..CIRCUITS {
        let mut r = rng::stream(SEED, &[1, i]);
        let n = r.random_range(2..=6usize);
        let depth = r.random_range(1..=3usize);
        let kind = families[i as usize % 3];
        let spec = AnsatzSpec {
            kind,
            n_qubits: n,
            depth,
            seed: kind.needs_seed().then(|| derive_seed(SEED, &[1, i])),
        };
        let circuit = build_ansatz(&spec).unwrap();
        let s = uniform(&mut r, n);
        let theta = uniform(&mut r, circuit.n_params());
        let k = r.random_range(1..=n);
        let projector_actions = r.random_range(2..=1usize << n);
        let partitions = [
            ActionPartition::contiguous(n, 1 << k).unwrap(),
            ActionPartition::parity(n, 1 << k).unwrap(),
            ActionPartition::new(PartitionScheme::ActionProjector, n, projector_actions).unwrap(),
        ];
        for partition in &partitions {
            let model = PolicyModel::new(&circuit, partition).unwrap();
            let slots: Vec<usize> = (0..circuit.n_params()).collect();
            let jac = model.jacobian(&s, &theta, &slots, Estimator::Exact).unwrap();
            for a in 0..partition.n_actions() {
                let fd = finite_difference_grad(&circuit, &s, &theta, partition, a, DEFAULT_FD_STEP).unwrap();
                for (row, d) in jac.rows.iter().zip(&fd.values) {
                    worst = worst.max((row[a] - d).abs());
                    checked += 1;
                }
            }
        }
    }
    let pass = worst < TOL;
    report(
        1,
        "shift rule vs central differences",
        pass,
        &format!("{CIRCUITS} circuits, {checked} components, max |diff| {worst:.2e} (tol {TOL:.0e})"),
    );
    assert!(pass);
}

#[test]
fn c02_partitions_are_equal_size_covers() {
    let mut failures = Vec::new();
    let mut cases = 0;
    for n in 1..=8usize {
        let dim = 1usize << n;
        for k in 1..=n {
            let a = 1usize << k;
            for scheme in [PartitionScheme::Contiguous, PartitionScheme::ParityRecursive] {
                cases += 1;
                let p = ActionPartition::new(scheme, n, a).unwrap();
                let mut sizes = vec![0usize; a];
                let mut ok = true;
                for i in 0..dim {
                    let mut indicator = vec![0.0; dim];
                    indicator[i] = 1.0;
                    let masses = p.action_masses(&indicator);
                    let owners: Vec<usize> = (0..a).filter(|&j| masses[j] != 0.0).collect();
                    // exactly one owner with unit mass, agreeing with the direct lookup
                    if owners.len() != 1 || masses[owners[0]] != 1.0 || assign_action(i, &p).unwrap() != owners[0] {
                        ok = false;
                        break;
                    }
                    sizes[owners[0]] += 1;
                }
                if !ok || sizes.iter().any(|&c| c != dim / a) {
                    failures.push(format!("{} n={n} |A|={a}", scheme.name()));
                }
            }
        }
    }
    let pass = failures.is_empty();
    report(
        2,
        "partitions disjoint, exhaustive, equal-size",
        pass,
        &format!("{cases} (scheme, n, |A|) cases for n <= 8, failures: [{}]", failures.join("; ")),
    );
    assert!(pass);
}

fn two_design(n_list: Vec<usize>, depth: DepthRule, actions: ActionRule, scheme: PartitionScheme, ensemble: usize) -> VarianceScanConfig {
    let mut c = VarianceScanConfig::new(AnsatzKind::SimplifiedTwoDesign, depth, n_list, actions, scheme, SEED);
    c.ensemble_size = ensemble;
    c
}

#[test]
fn c03_parity_variance_decays_exponentially() {
    const MAX_SLOPE: f64 = -0.2;
    const MIN_R2: f64 = 0.8;
    const MAX_RATIO: f64 = 0.1;
    let ns = [4usize, 6, 8, 10];
    let cfg = two_design(
        ns.to_vec(),
        DepthRule::Quadratic { cap: 20 },
        ActionRule::Fixed { sizes: vec![2] },
        PartitionScheme::ParityRecursive,
        500,
    );
    let v: Vec<f64> = ns.iter().map(|&n| variance(&cfg, n, 2)).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = fit_scaling(&xs, &v, ScalingModel::ExpDecay).unwrap();
    let ratio = v[3] / v[0];
    let pass = fit.slope < MAX_SLOPE && fit.r_squared > MIN_R2 && ratio < MAX_RATIO;
    report(
        3,
        "parity |A|=2 variance decays exponentially",
        pass,
        &format!(
            "V = [{}], slope {:.3} (< {MAX_SLOPE}), r2 {:.3} (> {MIN_R2}), V(10)/V(4) {ratio:.3e} (< {MAX_RATIO})",
            fmt_list(&v),
            fit.slope,
            fit.r_squared
        ),
    );
    assert!(pass);
}

#[test]
fn c04_contiguous_keeps_polynomial_variance() {
    let ns = [4usize, 8, 16];
    let contiguous = two_design(ns.to_vec(), DepthRule::Log2Ceil, ActionRule::EqualsN, PartitionScheme::Contiguous, 500);
    let parity = two_design(
        ns.to_vec(),
        DepthRule::Log2Ceil,
        ActionRule::Fixed { sizes: vec![2] },
        PartitionScheme::ParityRecursive,
        500,
    );
    let vc: Vec<f64> = ns.iter().map(|&n| variance(&contiguous, n, n)).collect();
    let vp: Vec<f64> = ns.iter().map(|&n| variance(&parity, n, 2)).collect();
    let ratio: Vec<f64> = vc.iter().zip(&vp).map(|(c, p)| c / p).collect();
    let monotone = ratio.windows(2).all(|w| w[1] > w[0]);
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let pow = fit_scaling(&xs, &vc, ScalingModel::PowerLaw).unwrap();
    let exp = fit_scaling(&xs, &vp, ScalingModel::ExpDecay).unwrap();
    // log-variance decline across n = 4..16 implied by each fit
    let span_n = xs[2] - xs[0];
    let span_ln = (xs[2] / xs[0]).ln();
    let decline_pow = pow.slope.abs() * span_ln;
    let decline_exp = exp.slope.abs() * span_n;
    let pass = monotone && decline_pow < decline_exp;
    report(
        4,
        "contiguous |A|=n outlasts parity",
        pass,
        &format!(
            "V_contig = [{}], V_parity = [{}], ratio = [{}] monotone {monotone}, ln-decline power {decline_pow:.3} vs exp {decline_exp:.3}",
            fmt_list(&vc),
            fmt_list(&vp),
            fmt_list(&ratio)
        ),
    );
    assert!(pass);
}

#[test]
fn c05_clipping_suppresses_large_action_sets() {
    const MIN_FACTOR: f64 = 2.0;
    let n = 10;
    let mut cfg = two_design(
        vec![n],
        DepthRule::Quadratic { cap: 20 },
        ActionRule::PowersOfTwo,
        PartitionScheme::Contiguous,
        2000,
    );
    cfg.clip = ClipRule::InverseSquare;
    let sizes = cfg.actions.sizes(n);
    let v: Vec<f64> = sizes.iter().map(|&a| variance(&cfg, n, a)).collect();
    let peak = v.iter().cloned().fold(f64::MIN, f64::max);
    let last = *v.last().unwrap();
    let pass = last * MIN_FACTOR <= peak;
    report(
        5,
        "clipped variance drops at |A|=2^n",
        pass,
        &format!("V(|A|=2..1024) = [{}], peak/V(1024) = {:.3} (>= {MIN_FACTOR})", fmt_list(&v), peak / last),
    );
    assert!(pass);
}

fn fim_fraction(n: usize, scheme: PartitionScheme, n_actions: usize) -> f64 {
    const THRESHOLD: f64 = 1e-3;
    let circuit = build_ansatz(&AnsatzSpec::new(AnsatzKind::SimplifiedTwoDesign, n, (n * n).min(20))).unwrap();
    let partition = ActionPartition::new(scheme, n, n_actions).unwrap();
    let theta = uniform(&mut rng::stream(SEED, &[6, n as u64]), circuit.n_params());
    let result = fim(
        &circuit,
        &partition,
        &theta,
        10,
        ActionSampling::Enumerated,
        derive_seed(SEED, &[6, n as u64, 1]),
        None,
    )
    .unwrap();
    concentration_fraction(&result.eigenvalues, THRESHOLD)
}

#[test]
fn c06_fim_spectra_concentrate_for_parity() {
    let ns = [4usize, 6, 8, 10];
    let parity: Vec<f64> = ns.iter().map(|&n| fim_fraction(n, PartitionScheme::ParityRecursive, 2)).collect();
    let projector: Vec<f64> = [4usize, 10]
        .iter()
        .map(|&n| fim_fraction(n, PartitionScheme::ActionProjector, 1 << n))
        .collect();
    let inv = inversions(&parity);
    let pass = inv <= 1 && projector[1] < projector[0];
    report(
        6,
        "FIM eigenvalue concentration",
        pass,
        &format!(
            "parity fractions [{}] ({inv} inversions, <= 1), projector n=4 {:.3} vs n=10 {:.3}",
            fmt_list(&parity),
            projector[0],
            projector[1]
        ),
    );
    assert!(pass);
}

/// Learning rate shared by both bandit regimes; chosen on seeds other than
/// [`SEED`].
const BANDIT_LEARNING_RATE: f64 = 0.016;

fn bandit_config(n: usize, arms: usize, scheme: PartitionScheme) -> BanditConfig {
    let mut c = BanditConfig::new(n, arms, scheme, SEED);
    c.depth = 2;
    c.episodes = 100;
    c.trials = 10;
    c.shots = Some(10 * (n * n) as u64);
    c.learning_rate = BANDIT_LEARNING_RATE;
    c
}

/// Mean over trials of the best-arm probability averaged over the last 10 episodes.
fn final_p_best(records: &[TrainRecord]) -> f64 {
    records
        .iter()
        .map(|r| {
            let tail = &r.p_best[r.len() - 10..];
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .sum::<f64>()
        / records.len() as f64
}

#[test]
fn c07_bandit_contiguous_learns_parity_does_not() {
    const CONTIGUOUS_MIN: f64 = 0.6;
    const PARITY_MAX: f64 = 0.5;
    let c = final_p_best(&train_bandit(&bandit_config(8, 8, PartitionScheme::Contiguous)).unwrap());
    let p = final_p_best(&train_bandit(&bandit_config(8, 8, PartitionScheme::ParityRecursive)).unwrap());
    let pass = c >= CONTIGUOUS_MIN && p <= PARITY_MAX;
    report(
        7,
        "bandit n=8 |A|=8",
        pass,
        &format!("final P(best): contiguous {c:.3} (>= {CONTIGUOUS_MIN}), parity {p:.3} (<= {PARITY_MAX})"),
    );
    assert!(pass);
}

#[test]
fn c08_bandit_large_action_set_fails_for_both() {
    let n = 12;
    let arms = 1usize << (n - 4);
    let bound = 5.0 / arms as f64 * 5.0;
    let c = final_p_best(&train_bandit(&bandit_config(n, arms, PartitionScheme::Contiguous)).unwrap());
    let p = final_p_best(&train_bandit(&bandit_config(n, arms, PartitionScheme::ParityRecursive)).unwrap());
    let pass = c < bound && p < bound;
    report(
        8,
        "bandit n=12 |A|=256",
        pass,
        &format!("final P(best): contiguous {c:.4}, parity {p:.4} (both < {bound:.4}; uniform {:.4})", 1.0 / arms as f64),
    );
    assert!(pass);
}

#[test]
fn c09_product_states_avoid_log_gradient_decay() {
    let ns: Vec<usize> = (2..=10).collect();
    let mut lines = Vec::new();
    let mut pass = true;
    for layers in 1..=4 {
        let cells: Vec<_> = ns.iter().map(|&n| product_state_cell(n, layers, 1000, SEED).unwrap()).collect();
        let log_var: Vec<f64> = cells.iter().map(|c| c.log_var).collect();
        let prob_var: Vec<f64> = cells.iter().map(|c| c.prob_var).collect();
        let log_inv = inversions(&log_var);
        let prob_decreasing = prob_var.windows(2).all(|w| w[1] < w[0]);
        pass &= log_inv <= 1 && prob_decreasing;
        lines.push(format!(
            "L={layers}: log-var {:.3e}->{:.3e} ({log_inv} inversions), prob-var {:.3e}->{:.3e} decreasing {prob_decreasing}",
            log_var[0],
            log_var[log_var.len() - 1],
            prob_var[0],
            prob_var[prob_var.len() - 1]
        ));
    }
    report(9, "product-state log vs prob gradients", pass, &lines.join("; "));
    assert!(pass);
}

fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn c10_variance_and_return_bounds() {
    const SLACK: f64 = 1.05;
    const DRAWS: usize = 200;
    let env = BanditEnv::new(2).unwrap();
    let r_max = env.max_reward();
    let mut bound_fail = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut return_fail = 0;
    let mut trajectories = 0;
    for instance in 0..200u64 {
        let mut r = rng::stream(SEED, &[10, instance]);
        let scheme = if instance % 2 == 0 { PartitionScheme::Contiguous } else { PartitionScheme::ParityRecursive };
        let partition = ActionPartition::new(scheme, 2, 2).unwrap();
        let circuit = build_ansatz(&AnsatzSpec::new(AnsatzKind::BanditLayer, 2, 1 + (instance as usize / 2) % 2)).unwrap();
        let theta = uniform(&mut r, circuit.n_params());
        let model = PolicyModel::new(&circuit, &partition).unwrap();
        let ctx = PolicyContext { model, theta: &theta, estimator: Estimator::Exact, clip_floor: None };
        let s = vec![0.0; 2];
        let policy = model.policy(&s, &theta, Estimator::Exact).unwrap();
        let slots: Vec<usize> = (0..theta.len()).collect();
        let mut grads = vec![Vec::with_capacity(DRAWS); slots.len()];
        let mut scores = vec![Vec::with_capacity(DRAWS); slots.len()];
        for _ in 0..DRAWS {
            let a = policy.sample(&mut r);
            let traj = Trajectory::new(vec![Step { state: s.clone(), action: a, reward: env.reward(a) }], 0.0).unwrap();
            let total: f64 = discounted_returns(&traj).iter().sum();
            trajectories += 1;
            if total > return_upper_bound(r_max, traj.horizon(), 0.0).unwrap() {
                return_fail += 1;
            }
            let g = reinforce_gradient_against(std::slice::from_ref(&traj), &ctx, &[0.0]).unwrap();
            let (lg, _) = model.log_grad_slots(&s, &theta, a, &slots, Estimator::Exact, None).unwrap();
            for k in 0..slots.len() {
                grads[k].push(g.values[k]);
                scores[k].push(lg.values[k]);
            }
        }
        for k in 0..slots.len() {
            let rhs = variance_bound_rhs(r_max, 1, 0.0, sample_var(&scores[k])).unwrap();
            let lhs = sample_var(&grads[k]);
            // ratio only where the bound is not numerically zero
            if rhs > 1e-9 {
                worst_ratio = worst_ratio.max(lhs / rhs);
            }
            if lhs > SLACK * rhs + 1e-12 {
                bound_fail += 1;
            }
        }
    }
    // multi-step discounted trajectories for the return bound
    let mut r = rng::stream(SEED, &[10, 1 << 20]);
    for _ in 0..200 {
        let horizon = r.random_range(1..=25usize);
        let gamma = r.random_range(0.0..0.99);
        let steps = (0..horizon)
            .map(|_| {
                let a = r.random_range(0..4usize);
                Step { state: vec![], action: a, reward: BanditEnv::new(4).unwrap().reward(a) }
            })
            .collect();
        let traj = Trajectory::new(steps, gamma).unwrap();
        trajectories += 1;
        let total: f64 = discounted_returns(&traj).iter().sum();
        if total > return_upper_bound(BanditEnv::new(4).unwrap().max_reward(), horizon, gamma).unwrap() {
            return_fail += 1;
        }
    }
    let pass = bound_fail == 0 && return_fail == 0;
    report(
        10,
        "gradient-variance and return bounds",
        pass,
        &format!(
            "200 instances: {bound_fail} variance-bound violations (max lhs/rhs {worst_ratio:.3} where rhs > 1e-9, slack {SLACK}); {trajectories} trajectories, {return_fail} return-bound violations"
        ),
    );
    assert!(pass);
}

const DETERMINISM_CONFIGS: [(&str, &str); 4] = [
    (
        "variance-scan",
        r#"
seed = 2024
[variance_scan]
ansatz = "simplified-two-design"
depth = { rule = "quadratic", cap = 20 }
n_list = [3, 4]
actions = { rule = "powers-of-two" }
schemes = ["contiguous", "parity"]
clips = [{ rule = "none" }, { rule = "inverse-square" }]
shots = 64
ensemble_size = 40
"#,
    ),
    (
        "fim-scan",
        r#"
seed = 2024
[fim_scan]
ansatz = "random-pauli-cz"
depth = { rule = "fixed", depth = 2 }
n_list = [3, 4]
actions = { rule = "fixed", sizes = [2] }
scheme = "parity"
state_samples = 4
action_sampling = "sampled"
clip_floor = 0.01
"#,
    ),
    (
        "bandit",
        r#"
seed = 2024
[bandit]
n_qubits = 3
n_arms = 4
schemes = ["contiguous", "parity"]
episodes = 15
trials = 6
shots = { rule = "quadratic", factor = 10 }
learning_rate = 0.05
"#,
    ),
    (
        "product-state",
        r#"
seed = 2024
[product_state]
n_list = [2, 3, 4]
layers = [1, 2]
ensemble = 100
"#,
    ),
];

fn run_to(dir: &Path, subcommand: &str, config: &Path, threads: &str) {
    let o = Command::new(env!("CARGO_BIN_EXE_qpg"))
        .env_remove("QPG_OUTPUT_DIR")
        .arg(subcommand)
        .arg("--config")
        .arg(config)
        .arg("--output-dir")
        .arg(dir)
        .args(["--threads", threads])
        .output()
        .unwrap();
    assert!(o.status.success(), "{subcommand}: {}", String::from_utf8_lossy(&o.stderr));
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn c11_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for (sub, body) in DETERMINISM_CONFIGS {
        let cfg = tmp.path().join(format!("{sub}.toml"));
        std::fs::write(&cfg, body).unwrap();
        let first = tmp.path().join(format!("{sub}-1"));
        let second = tmp.path().join(format!("{sub}-2"));
        // different pool sizes must not change a byte
        run_to(&first, sub, &cfg, "1");
        run_to(&second, sub, &cfg, "4");
        let (a, b) = (csv_files(&first), csv_files(&second));
        if a.is_empty() || a != b {
            mismatched.push(sub);
        }
        compared += a.len();
    }
    let pass = mismatched.is_empty();
    report(
        11,
        "rerun determinism",
        pass,
        &format!("4 subcommands, {compared} CSV files compared, mismatches: [{}]", mismatched.join(", ")),
    );
    assert!(pass);
}
