//! Experiment drivers. Each one computes all results first, then writes its
//! files in a fixed order.

use std::f64::consts::PI;

use qpg::agent::train_bandit;
use qpg::analysis::{concentration_fraction, fim, log_grad_variance, product_state_cell};
use qpg::policy::ActionPartition;
use qpg::qsim::{build_ansatz, AnsatzSpec};
use qpg::rng::{self, derive_seed};
use rand::Rng as _;

use crate::config::{BanditSection, ExperimentConfig, FimSection, ProductSection, VarianceSection};
use crate::error::CliError;
use crate::output::{fmt_f64, OutputSet, Table};
use crate::plot::{Chart, Series};

/// Whether any FIM had an eigenvalue below `-PSD_TOL`.
pub const PSD_TOL: f64 = 1e-8;

pub struct RunOutcome {
    pub psd_violation: Option<bool>,
}

pub fn variance_scan(
    cfg: &ExperimentConfig,
    v: &VarianceSection,
    out: &mut OutputSet,
) -> Result<RunOutcome, CliError> {
    let mut table = Table::new(&["n", "n_actions", "scheme", "clip", "variance", "stderr", "ensemble"]);
    let mut series = Vec::new();
    let single_n = v.n_list.len() == 1;
    for &scheme in &v.schemes {
        for &clip in &v.clips {
            let core = v.core_config(scheme, clip, cfg.seed);
            let mut by_actions: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
            let mut sweep = Vec::new();
            for &n in &v.n_list {
                for a in v.actions.sizes(n) {
                    let est = log_grad_variance(&core, n, a)?;
                    let m = est.moments;
                    table.push(vec![
                        n.to_string(),
                        a.to_string(),
                        scheme.name().to_string(),
                        clip.label(),
                        fmt_f64(m.variance),
                        fmt_f64(m.stderr),
                        m.count.to_string(),
                    ]);
                    if single_n {
                        sweep.push((a as f64, m.variance));
                    } else {
                        match by_actions.iter_mut().find(|(k, _)| *k == a) {
                            Some((_, pts)) => pts.push((n as f64, m.variance)),
                            None => by_actions.push((a, vec![(n as f64, m.variance)])),
                        }
                    }
                }
            }
            let tag = format!("{} clip={}", scheme.name(), clip.label());
            if single_n {
                series.push(Series { label: tag, points: sweep });
            } else {
                for (a, points) in by_actions {
                    series.push(Series { label: format!("{tag} |A|={a}"), points });
                }
            }
        }
    }
    out.write_table("variance_scan.csv", &table)?;
    if cfg.emit_plots {
        let chart = Chart {
            title: "log-policy gradient variance".into(),
            x_label: if single_n { "|A|".into() } else { "qubits n".into() },
            y_label: "Var[d log pi]".into(),
            log_x: single_n,
            log_y: true,
            series,
        };
        out.write("variance_scan.svg", chart.render().as_bytes())?;
    }
    Ok(RunOutcome { psd_violation: None })
}

const FIM_THETA: u64 = 0;
const FIM_STATES: u64 = 1;

pub fn fim_scan(cfg: &ExperimentConfig, f: &FimSection, out: &mut OutputSet) -> Result<RunOutcome, CliError> {
    let mut spectra = Table::new(&["n", "eigenvalue_index", "eigenvalue"]);
    let mut summary = Table::new(&[
        "n",
        "n_actions",
        "scheme",
        "n_params",
        "concentration_fraction",
        "threshold",
        "min_eigenvalue",
        "max_eigenvalue",
    ]);
    let mut violation = false;
    let mut series = Vec::new();
    for &n in &f.n_list {
        let n_actions = f.actions.sizes(n)[0];
        let spec = AnsatzSpec {
            kind: f.ansatz,
            n_qubits: n,
            depth: f.depth.depth(n),
            seed: f.ansatz.needs_seed().then(|| derive_seed(cfg.seed, &[n as u64])),
        };
        let circuit = build_ansatz(&spec)?;
        let partition = ActionPartition::new(f.scheme, n, n_actions)?;
        let mut r = rng::stream(cfg.seed, &[n as u64, FIM_THETA]);
        let theta: Vec<f64> = (0..circuit.n_params()).map(|_| r.random_range(-PI..PI)).collect();
        let result = fim(
            &circuit,
            &partition,
            &theta,
            f.state_samples,
            f.action_sampling,
            derive_seed(cfg.seed, &[n as u64, FIM_STATES]),
            f.clip_floor,
        )?;
        for (i, l) in result.eigenvalues.iter().enumerate() {
            spectra.push(vec![n.to_string(), i.to_string(), fmt_f64(*l)]);
        }
        let min = result.min_eigenvalue();
        violation |= min < -PSD_TOL;
        summary.push(vec![
            n.to_string(),
            n_actions.to_string(),
            f.scheme.name().to_string(),
            circuit.n_params().to_string(),
            fmt_f64(concentration_fraction(&result.eigenvalues, f.threshold)),
            fmt_f64(f.threshold),
            fmt_f64(min),
            fmt_f64(result.eigenvalues.first().copied().unwrap_or(0.0)),
        ]);
        series.push(Series {
            label: format!("n={n}"),
            points: log_histogram(&result.eigenvalues),
        });
    }
    out.write_table("fim_spectra.csv", &spectra)?;
    out.write_table("fim_summary.csv", &summary)?;
    if cfg.emit_plots {
        let chart = Chart {
            title: format!("FIM eigenvalues ({})", f.scheme.name()),
            x_label: "log10 |eigenvalue|".into(),
            y_label: "fraction of eigenvalues".into(),
            log_x: false,
            log_y: false,
            series,
        };
        out.write("fim_spectra.svg", chart.render().as_bytes())?;
    }
    Ok(RunOutcome { psd_violation: Some(violation) })
}

/// Normalized histogram of `log10 |lambda|` on half-decade bins from 1e-16
/// to 1e4; exact zeros land in the lowest bin.
fn log_histogram(values: &[f64]) -> Vec<(f64, f64)> {
    const LO: f64 = -16.0;
    const WIDTH: f64 = 0.5;
    const BINS: usize = 40;
    let mut counts = [0usize; BINS];
    for v in values {
        let e = v.abs().log10().max(LO);
        let b = (((e - LO) / WIDTH) as usize).min(BINS - 1);
        counts[b] += 1;
    }
    let total = values.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (LO + WIDTH * (i as f64 + 0.5), c as f64 / total))
        .collect()
}

pub fn bandit(cfg: &ExperimentConfig, b: &BanditSection, out: &mut OutputSet) -> Result<RunOutcome, CliError> {
    let mut series = Vec::new();
    for &scheme in &b.schemes {
        let records = train_bandit(&b.core_config(scheme, cfg.seed))?;
        let mut raw = Table::new(&["trial", "episode", "p_best", "grad_norm", "grad_var", "return"]);
        for rec in &records {
            for e in 0..rec.len() {
                raw.push(vec![
                    rec.trial.to_string(),
                    e.to_string(),
                    fmt_f64(rec.p_best[e]),
                    fmt_f64(rec.grad_norm[e]),
                    fmt_f64(rec.grad_var[e]),
                    fmt_f64(rec.returns[e]),
                ]);
            }
        }
        let mut curve = Table::new(&[
            "episode",
            "p_best_mean",
            "p_best_stderr",
            "grad_norm_mean",
            "grad_var_mean",
            "return_mean",
        ]);
        let trials = records.len() as f64;
        let mut points = Vec::new();
        for e in 0..b.episodes {
            let col = |f: &dyn Fn(&qpg::agent::TrainRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / trials;
            let p = col(&|r| r.p_best[e]);
            let pm = mean(&p);
            let se = if records.len() > 1 {
                (p.iter().map(|x| (x - pm).powi(2)).sum::<f64>() / (trials - 1.0) / trials).sqrt()
            } else {
                0.0
            };
            curve.push(vec![
                e.to_string(),
                fmt_f64(pm),
                fmt_f64(se),
                fmt_f64(mean(&col(&|r| r.grad_norm[e]))),
                fmt_f64(mean(&col(&|r| r.grad_var[e]))),
                fmt_f64(mean(&col(&|r| r.returns[e]))),
            ]);
            points.push((e as f64, pm));
        }
        out.write_table(&format!("bandit_{}.csv", scheme.name()), &raw)?;
        out.write_table(&format!("bandit_{}_mean.csv", scheme.name()), &curve)?;
        series.push(Series { label: scheme.name().to_string(), points });
    }
    if cfg.emit_plots {
        let chart = Chart {
            title: format!("best-arm probability, n={}, |A|={}", b.n_qubits, b.n_arms),
            x_label: "episode".into(),
            y_label: "mean P(best arm)".into(),
            log_x: false,
            log_y: false,
            series,
        };
        out.write("bandit.svg", chart.render().as_bytes())?;
    }
    Ok(RunOutcome { psd_violation: None })
}

pub fn product_state(cfg: &ExperimentConfig, p: &ProductSection, out: &mut OutputSet) -> Result<RunOutcome, CliError> {
    let mut table = Table::new(&[
        "n",
        "layers",
        "ensemble",
        "log_mean",
        "log_var",
        "log_abs_mean",
        "prob_mean",
        "prob_var",
        "prob_abs_mean",
    ]);
    let mut log_series = Vec::new();
    let mut prob_series = Vec::new();
    for &layers in &p.layers {
        let mut lp = Vec::new();
        let mut pp = Vec::new();
        for &n in &p.n_list {
            let s = product_state_cell(n, layers, p.ensemble, cfg.seed)?;
            table.push(vec![
                n.to_string(),
                layers.to_string(),
                s.ensemble.to_string(),
                fmt_f64(s.log_mean),
                fmt_f64(s.log_var),
                fmt_f64(s.log_abs_mean),
                fmt_f64(s.prob_mean),
                fmt_f64(s.prob_var),
                fmt_f64(s.prob_abs_mean),
            ]);
            lp.push((n as f64, s.log_var));
            pp.push((n as f64, s.prob_var));
        }
        log_series.push(Series { label: format!("layers={layers}"), points: lp });
        prob_series.push(Series { label: format!("layers={layers}"), points: pp });
    }
    out.write_table("product_state.csv", &table)?;
    if cfg.emit_plots {
        for (name, title, series) in [
            ("product_state_log.svg", "log-probability cost", log_series),
            ("product_state_prob.svg", "probability cost", prob_series),
        ] {
            let chart = Chart {
                title: format!("gradient variance, {title}"),
                x_label: "qubits n".into(),
                y_label: "variance".into(),
                log_x: false,
                log_y: true,
                series,
            };
            out.write(name, chart.render().as_bytes())?;
        }
    }
    Ok(RunOutcome { psd_violation: None })
}
