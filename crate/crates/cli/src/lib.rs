//! Configuration-driven experiment driver for the `qpg` binary.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;
pub mod selftest;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
use output::{now_rfc3339, FileEntry, OutputSet, RunManifest, MANIFEST_NAME};

/// Scalar fields that command-line flags or the environment may override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub emit_plots: Option<bool>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(p) = self.emit_plots {
            cfg.emit_plots = p;
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    /// Data and plot files, excluding the manifest.
    pub files: Vec<FileEntry>,
    pub psd_violation: Option<bool>,
}

/// Validates `config`, runs `experiment` on a pool sized by `config.threads`
/// and writes the outputs followed by the manifest.
pub fn execute(experiment: Experiment, mut config: ExperimentConfig) -> Result<RunReport, CliError> {
    config.validate(experiment)?;
    config.experiment = Some(experiment);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    let started = now_rfc3339();
    let mut out = OutputSet::create(&config.output_dir)?;
    let outcome = pool.install(|| match experiment {
        Experiment::VarianceScan => run::variance_scan(&config, config.variance_scan.as_ref().expect("validated"), &mut out),
        Experiment::FimScan => run::fim_scan(&config, config.fim_scan.as_ref().expect("validated"), &mut out),
        Experiment::Bandit => run::bandit(&config, config.bandit.as_ref().expect("validated"), &mut out),
        Experiment::ProductState => run::product_state(&config, config.product_state.as_ref().expect("validated"), &mut out),
    })?;
    let files = out.files().to_vec();
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: experiment.name(),
        config: &config,
        started,
        finished: now_rfc3339(),
        files: &files,
        psd_violation: outcome.psd_violation,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.into()))?;
    std::fs::write(config.output_dir.join(MANIFEST_NAME), json)?;
    Ok(RunReport {
        output_dir: config.output_dir,
        files,
        psd_violation: outcome.psd_violation,
    })
}
