//! Run configuration: one TOML file per run, validated in full before any
//! simulation starts.

use std::path::{Path, PathBuf};

use qpg::agent::{BanditConfig, BaselineKind};
use qpg::analysis::{ActionRule, ActionSampling, ClipRule, DepthRule, ProbeSlot, VarianceScanConfig};
use qpg::policy::PartitionScheme;
use qpg::qsim::{AnsatzKind, AnsatzSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VarianceScan,
    FimScan,
    Bandit,
    ProductState,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::VarianceScan => "variance-scan",
            Experiment::FimScan => "fim-scan",
            Experiment::Bandit => "bandit",
            Experiment::ProductState => "product-state",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_scan: Option<VarianceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fim_scan: Option<FimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_state: Option<ProductSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qpg-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSection {
    pub ansatz: AnsatzKind,
    pub depth: DepthRule,
    pub n_list: Vec<usize>,
    pub actions: ActionRule,
    pub schemes: Vec<PartitionScheme>,
    #[serde(default = "default_clips")]
    pub clips: Vec<ClipRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default = "default_variance_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub probe: ProbeSlot,
}

fn default_clips() -> Vec<ClipRule> {
    vec![ClipRule::None]
}
fn default_variance_ensemble() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FimSection {
    pub ansatz: AnsatzKind,
    pub depth: DepthRule,
    pub n_list: Vec<usize>,
    /// Must yield exactly one action count per qubit count.
    pub actions: ActionRule,
    pub scheme: PartitionScheme,
    #[serde(default = "default_state_samples")]
    pub state_samples: usize,
    #[serde(default)]
    pub action_sampling: ActionSampling,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_floor: Option<f64>,
}

fn default_state_samples() -> usize {
    10
}
fn default_threshold() -> f64 {
    qpg::analysis::DEFAULT_CONCENTRATION_THRESHOLD
}

/// Rule for the shot budget per circuit execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ShotRule {
    Exact,
    Fixed { shots: u64 },
    /// `factor * n^2`
    Quadratic { factor: u64 },
}

impl ShotRule {
    pub fn shots(self, n: usize) -> Option<u64> {
        match self {
            ShotRule::Exact => None,
            ShotRule::Fixed { shots } => Some(shots),
            ShotRule::Quadratic { factor } => Some(factor * (n * n) as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSection {
    pub n_qubits: usize,
    pub n_arms: usize,
    pub schemes: Vec<PartitionScheme>,
    #[serde(default = "default_bandit_depth")]
    pub depth: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_shot_rule")]
    pub shots: ShotRule,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_baseline")]
    pub baseline: BaselineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_floor: Option<f64>,
}

fn default_bandit_depth() -> usize {
    2
}
fn default_episodes() -> usize {
    100
}
fn default_trials() -> usize {
    50
}
fn default_shot_rule() -> ShotRule {
    ShotRule::Quadratic { factor: 10 }
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_batch() -> usize {
    1
}
fn default_baseline() -> BaselineKind {
    BaselineKind::Running { window: 10 }
}

impl BanditSection {
    pub fn core_config(&self, scheme: PartitionScheme, seed: u64) -> BanditConfig {
        BanditConfig {
            n_qubits: self.n_qubits,
            n_arms: self.n_arms,
            scheme,
            depth: self.depth,
            episodes: self.episodes,
            trials: self.trials,
            shots: self.shots.shots(self.n_qubits),
            learning_rate: self.learning_rate,
            seed,
            batch_size: self.batch_size,
            baseline: self.baseline,
            clip_floor: self.clip_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSection {
    #[serde(default = "default_product_n")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_product_layers")]
    pub layers: Vec<usize>,
    #[serde(default = "default_product_ensemble")]
    pub ensemble: usize,
}

fn default_product_n() -> Vec<usize> {
    (2..=12).collect()
}
fn default_product_layers() -> Vec<usize> {
    (1..=8).collect()
}
fn default_product_ensemble() -> usize {
    10_000
}

impl VarianceSection {
    pub fn core_config(&self, scheme: PartitionScheme, clip: ClipRule, seed: u64) -> VarianceScanConfig {
        VarianceScanConfig {
            ansatz: self.ansatz,
            depth: self.depth,
            n_list: self.n_list.clone(),
            actions: self.actions.clone(),
            scheme,
            shots: self.shots,
            clip,
            ensemble_size: self.ensemble_size,
            probe: self.probe,
            seed,
        }
    }
}

fn field<E: std::fmt::Display>(name: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{name}: {e}"))
}

fn ensure(cond: bool, name: &str, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name}: {msg}")))
    }
}

fn ascending(name: &str, list: &[usize]) -> Result<(), CliError> {
    ensure(
        !list.is_empty() && list.windows(2).all(|w| w[0] < w[1]),
        name,
        "must be non-empty and strictly ascending",
    )
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every field needed by `experiment`; the first violation names
    /// its field.
    pub fn validate(&self, experiment: Experiment) -> Result<(), CliError> {
        if let Some(declared) = self.experiment {
            ensure(
                declared == experiment,
                "experiment",
                &format!("config declares {} but {} was requested", declared.name(), experiment.name()),
            )?;
        }
        if let Some(t) = self.threads {
            ensure(t >= 1, "threads", "must be >= 1")?;
        }
        match experiment {
            Experiment::VarianceScan => {
                let v = self.variance_scan.as_ref().ok_or_else(|| missing("variance_scan"))?;
                ensure(!v.schemes.is_empty(), "variance_scan.schemes", "must list at least one scheme")?;
                ensure(!v.clips.is_empty(), "variance_scan.clips", "must list at least one clip rule")?;
                ascending("variance_scan.n_list", &v.n_list)?;
                ensure(v.ensemble_size >= 2, "variance_scan.ensemble_size", "must be >= 2")?;
                for &scheme in &v.schemes {
                    for &clip in &v.clips {
                        v.core_config(scheme, clip, self.seed)
                            .validate()
                            .map_err(field("variance_scan"))?;
                    }
                }
            }
            Experiment::FimScan => {
                let f = self.fim_scan.as_ref().ok_or_else(|| missing("fim_scan"))?;
                ascending("fim_scan.n_list", &f.n_list)?;
                ensure(f.state_samples >= 1, "fim_scan.state_samples", "must be >= 1")?;
                ensure(f.threshold > 0.0, "fim_scan.threshold", "must be positive")?;
                if let Some(floor) = f.clip_floor {
                    ensure(floor > 0.0 && floor < 1.0, "fim_scan.clip_floor", "must lie in (0, 1)")?;
                }
                for &n in &f.n_list {
                    let sizes = f.actions.sizes(n);
                    ensure(sizes.len() == 1, "fim_scan.actions", "must give one action count per n")?;
                    qpg::policy::ActionPartition::new(f.scheme, n, sizes[0]).map_err(field("fim_scan.actions"))?;
                    let spec = AnsatzSpec {
                        kind: f.ansatz,
                        n_qubits: n,
                        depth: f.depth.depth(n),
                        seed: Some(0),
                    };
                    qpg::qsim::build_ansatz(&spec).map_err(field("fim_scan.ansatz"))?;
                }
            }
            Experiment::Bandit => {
                let b = self.bandit.as_ref().ok_or_else(|| missing("bandit"))?;
                ensure(!b.schemes.is_empty(), "bandit.schemes", "must list at least one scheme")?;
                if let ShotRule::Fixed { shots: 0 } | ShotRule::Quadratic { factor: 0 } = b.shots {
                    return Err(CliError::Config("bandit.shots: must be >= 1".into()));
                }
                for &scheme in &b.schemes {
                    b.core_config(scheme, self.seed).validate().map_err(field("bandit"))?;
                }
            }
            Experiment::ProductState => {
                let p = self.product_state.as_ref().ok_or_else(|| missing("product_state"))?;
                ascending("product_state.n_list", &p.n_list)?;
                ascending("product_state.layers", &p.layers)?;
                ensure(p.layers[0] >= 1, "product_state.layers", "must be >= 1")?;
                ensure(p.n_list[0] >= 1, "product_state.n_list", "must be >= 1")?;
                ensure(
                    *p.n_list.last().unwrap() <= qpg::qsim::MAX_QUBITS,
                    "product_state.n_list",
                    "exceeds the simulator limit",
                )?;
                ensure(p.ensemble >= 2, "product_state.ensemble", "must be >= 2")?;
            }
        }
        Ok(())
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("{section}: section missing"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARIANCE: &str = r#"
seed = 3
output_dir = "out"
[variance_scan]
ansatz = "simplified-two-design"
depth = { rule = "quadratic", cap = 20 }
n_list = [4, 6]
actions = { rule = "powers-of-two" }
schemes = ["contiguous", "parity"]
ensemble_size = 10
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_toml(VARIANCE).unwrap();
        assert!(c.validate(Experiment::VarianceScan).is_ok());
        let v = c.variance_scan.as_ref().unwrap();
        assert_eq!(v.schemes[1], PartitionScheme::ParityRecursive);
        assert_eq!(v.clips, vec![ClipRule::None]);
        assert!(matches!(c.validate(Experiment::Bandit), Err(CliError::Config(m)) if m.starts_with("bandit")));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = VARIANCE.replace("ensemble_size = 10", "ensemble_size = 1");
        let c = ExperimentConfig::from_toml(&bad).unwrap();
        let err = c.validate(Experiment::VarianceScan).unwrap_err().to_string();
        assert!(err.contains("variance_scan.ensemble_size"), "{err}");

        let bad = VARIANCE.replace("n_list = [4, 6]", "n_list = [6, 4]");
        let err = ExperimentConfig::from_toml(&bad).unwrap().validate(Experiment::VarianceScan).unwrap_err();
        assert!(err.to_string().contains("variance_scan.n_list"));

        let typo = VARIANCE.replace("ensemble_size", "ensemble");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn shot_rules() {
        assert_eq!(ShotRule::Quadratic { factor: 10 }.shots(8), Some(640));
        assert_eq!(ShotRule::Exact.shots(8), None);
    }
}
