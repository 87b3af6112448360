use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpg_cli::{execute, selftest, CliError, Experiment, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "qpg", version, about = "Gradient-variance experiments for Born-rule quantum policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "QPG_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Write SVG plots next to the CSVs; `--emit-plots false` disables.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    emit_plots: Option<bool>,
    #[arg(long, global = true, env = "QPG_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Log-policy gradient variance over (n, |A|, scheme, clip) cells.
    VarianceScan,
    /// Fisher information spectra per qubit count.
    FimScan,
    /// REINFORCE on the multi-armed bandit.
    Bandit,
    /// Shared-parameter product-state gradient statistics.
    ProductState,
    /// Run the built-in invariant checks.
    Selftest,
}

fn experiment(cli: &Cli, experiment: Experiment) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("config: --config <FILE> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    Overrides {
        seed: cli.seed,
        output_dir: cli.output_dir.clone(),
        emit_plots: cli.emit_plots,
        threads: cli.threads,
    }
    .apply(&mut cfg);
    let report = execute(experiment, cfg)?;
    for f in &report.files {
        println!("{}  {}", f.sha256, report.output_dir.join(&f.path).display());
    }
    if report.psd_violation == Some(true) {
        eprintln!("warning: a Fisher matrix had an eigenvalue below -1e-8");
    }
    Ok(())
}

fn run_selftest() -> Result<(), CliError> {
    let checks = selftest::run_all()?;
    let mut failed = Vec::new();
    for c in &checks {
        println!("{} {:<22} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::VarianceScan => experiment(&cli, Experiment::VarianceScan),
        Command::FimScan => experiment(&cli, Experiment::FimScan),
        Command::Bandit => experiment(&cli, Experiment::Bandit),
        Command::ProductState => experiment(&cli, Experiment::ProductState),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
