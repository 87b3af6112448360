//! REINFORCE with a baseline over Born policies, the deterministic
//! multi-armed bandit, and the return/variance bounds.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{Estimator, GradientVector, PolicyModel, ShiftRule};
use crate::policy::{ActionPartition, PartitionScheme};
use crate::qsim::{build_ansatz, AnsatzKind, AnsatzSpec};
use crate::rng::{self, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    /// Reward received after taking `action`.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub gamma: f64,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>, gamma: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("trajectory needs at least one step".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("discount must be in [0, 1), got {gamma}")));
        }
        Ok(Self { steps, gamma })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

/// `G_t = sum_{k >= t} gamma^(k - t) r_{k+1}`.
pub fn discounted_returns(traj: &Trajectory) -> Vec<f64> {
    let mut out = vec![0.0; traj.steps.len()];
    let mut acc = 0.0;
    for (t, step) in traj.steps.iter().enumerate().rev() {
        acc = step.reward + traj.gamma * acc;
        out[t] = acc;
    }
    out
}

/// Mean of `G_t` over the trajectories that reach step `t`.
pub fn baseline(returns: &[Vec<f64>], t: usize) -> f64 {
    let hits: Vec<f64> = returns.iter().filter_map(|g| g.get(t).copied()).collect();
    if hits.is_empty() {
        0.0
    } else {
        hits.iter().sum::<f64>() / hits.len() as f64
    }
}

/// Everything needed to evaluate log-policy gradients at fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext<'a> {
    pub model: PolicyModel<'a>,
    pub theta: &'a [f64],
    pub estimator: Estimator,
    pub clip_floor: Option<f64>,
}

impl PolicyContext<'_> {
    fn log_grad(&self, state: &[f64], action: usize, salt: &[u64]) -> Result<GradientVector> {
        let estimator = match self.estimator {
            Estimator::Exact => Estimator::Exact,
            Estimator::Shots { shots, seed } => Estimator::Shots {
                shots,
                seed: derive_seed(seed, salt),
            },
        };
        let slots: Vec<usize> = (0..self.theta.len()).collect();
        self.model
            .log_grad_slots(state, self.theta, action, &slots, estimator, self.clip_floor)
            .map(|(g, _)| g)
    }
}

/// `(1/N) sum_i sum_t (G_t(tau_i) - b(s_t)) grad log pi(a_t | s_t)` with the
/// batch-mean baseline.
pub fn reinforce_gradient(batch: &[Trajectory], ctx: &PolicyContext) -> Result<GradientVector> {
    let returns: Vec<Vec<f64>> = batch.iter().map(discounted_returns).collect();
    let horizon = batch.iter().map(Trajectory::horizon).max().unwrap_or(0);
    let b: Vec<f64> = (0..horizon).map(|t| baseline(&returns, t)).collect();
    reinforce_gradient_against(batch, ctx, &b)
}

/// REINFORCE estimate against explicit per-step baseline values (zeros give
/// the plain estimator).
pub fn reinforce_gradient_against(
    batch: &[Trajectory],
    ctx: &PolicyContext,
    baselines: &[f64],
) -> Result<GradientVector> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory batch".into()));
    }
    let k = ctx.theta.len();
    let mut values = vec![0.0; k];
    let mut evals = 0;
    for (i, traj) in batch.iter().enumerate() {
        let g = discounted_returns(traj);
        for (t, step) in traj.steps.iter().enumerate() {
            let adv = g[t] - baselines.get(t).copied().unwrap_or(0.0);
            if adv == 0.0 {
                continue;
            }
            let lg = ctx.log_grad(&step.state, step.action, &[i as u64, t as u64])?;
            evals += lg.evals_used;
            values.iter_mut().zip(&lg.values).for_each(|(v, x)| *v += adv * x);
        }
    }
    let n = batch.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(GradientVector {
        values,
        evals_used: evals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditEnv {
    pub n_arms: usize,
}

impl BanditEnv {
    pub fn new(n_arms: usize) -> Result<Self> {
        if n_arms < 2 {
            return Err(Error::InvalidArgument("bandit needs at least two arms".into()));
        }
        Ok(Self { n_arms })
    }

    pub fn reward(&self, arm: usize) -> f64 {
        2.0 * arm as f64
    }

    pub fn best_arm(&self) -> usize {
        self.n_arms - 1
    }

    pub fn max_reward(&self) -> f64 {
        self.reward(self.best_arm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaselineKind {
    /// Mean return of the current batch (zero advantage when the batch has one episode).
    BatchMean,
    /// Mean over the returns of the previous `window` episodes, 0 before any.
    Running { window: usize },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub n_qubits: usize,
    pub n_arms: usize,
    pub scheme: PartitionScheme,
    #[serde(default = "default_bandit_depth")]
    pub depth: usize,
    pub episodes: usize,
    pub trials: usize,
    /// Shots per circuit execution; `None` learns from exact probabilities.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_baseline")]
    pub baseline: BaselineKind,
    #[serde(default)]
    pub clip_floor: Option<f64>,
}

fn default_bandit_depth() -> usize {
    2
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_batch_size() -> usize {
    1
}
fn default_baseline() -> BaselineKind {
    BaselineKind::Running { window: 10 }
}

impl BanditConfig {
    pub fn new(n_qubits: usize, n_arms: usize, scheme: PartitionScheme, seed: u64) -> Self {
        Self {
            n_qubits,
            n_arms,
            scheme,
            depth: default_bandit_depth(),
            episodes: 100,
            trials: 10,
            shots: None,
            learning_rate: default_learning_rate(),
            seed,
            batch_size: default_batch_size(),
            baseline: default_baseline(),
            clip_floor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.episodes == 0 || self.trials == 0 || self.batch_size == 0 {
            return bad("episodes, trials and batch_size must be >= 1".into());
        }
        if self.shots == Some(0) {
            return bad("shots must be >= 1".into());
        }
        if !self.learning_rate.is_finite() {
            return bad(format!("learning rate {} is not finite", self.learning_rate));
        }
        if let BaselineKind::Running { window: 0 } = self.baseline {
            return bad("running baseline window must be >= 1".into());
        }
        if let Some(f) = self.clip_floor {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("clip floor {f} outside (0, 1)"));
            }
        }
        ActionPartition::new(self.scheme, self.n_qubits, self.n_arms)?;
        build_ansatz(&self.ansatz())?;
        Ok(())
    }

    pub fn ansatz(&self) -> AnsatzSpec {
        AnsatzSpec::new(AnsatzKind::BanditLayer, self.n_qubits, self.depth)
    }
}

/// Per-trial learning curves. The gradient diagnostics describe the
/// log-policy gradient of the first sampled action of each episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub trial: usize,
    /// Exact best-arm probability at the start of each episode.
    pub p_best: Vec<f64>,
    pub grad_norm: Vec<f64>,
    /// Variance across the components of the log-policy gradient.
    pub grad_var: Vec<f64>,
    /// Mean return of the episode's batch.
    pub returns: Vec<f64>,
}

impl TrainRecord {
    pub fn len(&self) -> usize {
        self.p_best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_best.is_empty()
    }
}

fn component_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Trains one Born policy per trial on the bandit with gradient ascent.
/// Trials run concurrently on the current rayon pool.
pub fn train_bandit(config: &BanditConfig) -> Result<Vec<TrainRecord>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|trial| train_trial(config, trial))
        .collect()
}

fn train_trial(config: &BanditConfig, trial: usize) -> Result<TrainRecord> {
    let circuit = build_ansatz(&config.ansatz())?;
    let partition = ActionPartition::new(config.scheme, config.n_qubits, config.n_arms)?;
    let model = PolicyModel::new(&circuit, &partition)?.with_rule(ShiftRule::default());
    let env = BanditEnv::new(config.n_arms)?;
    let best = env.best_arm();
    let state = vec![0.0; config.n_qubits];
    let trial_seed = derive_seed(config.seed, &[trial as u64]);
    let mut r = rng::stream(trial_seed, &[0]);
    let mut theta: Vec<f64> = (0..circuit.n_params())
        .map(|_| r.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let slots: Vec<usize> = (0..theta.len()).collect();

    let mut rec = TrainRecord {
        trial,
        p_best: Vec::with_capacity(config.episodes),
        grad_norm: Vec::with_capacity(config.episodes),
        grad_var: Vec::with_capacity(config.episodes),
        returns: Vec::with_capacity(config.episodes),
    };
    let mut history: Vec<f64> = Vec::new();
    for episode in 0..config.episodes {
        rec.p_best
            .push(model.policy(&state, &theta, Estimator::Exact)?.probs[best]);

        let mut samples = Vec::with_capacity(config.batch_size);
        for item in 0..config.batch_size {
            let estimator = match config.shots {
                None => Estimator::Exact,
                Some(shots) => Estimator::Shots {
                    shots,
                    seed: derive_seed(trial_seed, &[1, episode as u64, item as u64]),
                },
            };
            // The action is drawn from the same (possibly shot-estimated)
            // policy whose probability forms the gradient denominator.
            let policy = model.policy(&state, &theta, estimator)?;
            let action = policy.sample(&mut r);
            let (lg, _) =
                model.log_grad_slots(&state, &theta, action, &slots, estimator, config.clip_floor)?;
            samples.push((env.reward(action), lg.values));
        }

        let batch_mean = samples.iter().map(|s| s.0).sum::<f64>() / samples.len() as f64;
        let b = match config.baseline {
            BaselineKind::BatchMean => batch_mean,
            BaselineKind::Running { window } => {
                let tail = &history[history.len().saturating_sub(window)..];
                if tail.is_empty() {
                    0.0
                } else {
                    tail.iter().sum::<f64>() / tail.len() as f64
                }
            }
            BaselineKind::None => 0.0,
        };
        let step = config.learning_rate / samples.len() as f64;
        for (ret, lg) in &samples {
            let adv = ret - b;
            theta.iter_mut().zip(lg).for_each(|(t, g)| *t += step * adv * g);
        }
        let first = &samples[0].1;
        rec.grad_norm.push(first.iter().map(|x| x * x).sum::<f64>().sqrt());
        rec.grad_var.push(component_variance(first));
        rec.returns.push(batch_mean);
        history.extend(samples.iter().map(|s| s.0));
    }
    Ok(rec)
}

fn check_discount(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "discount must be in [0, 1), got {gamma}"
        )));
    }
    Ok(())
}

/// `R_max T / (gamma - 1)^2`.
pub fn return_upper_bound(r_max: f64, horizon: usize, gamma: f64) -> Result<f64> {
    check_discount(gamma)?;
    Ok(r_max * horizon as f64 / (gamma - 1.0).powi(2))
}

/// `R_max^2 T^4 / (1 - gamma)^4 * V`.
pub fn variance_bound_rhs(r_max: f64, horizon: usize, gamma: f64, log_grad_variance: f64) -> Result<f64> {
    check_discount(gamma)?;
    Ok(r_max.powi(2) * (horizon as f64).powi(4) / (1.0 - gamma).powi(4) * log_grad_variance)
}
