use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    /// `ln V = a + b n`
    ExpDecay,
    /// `ln V = a + b ln n`
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingFit {
    /// Predicted `ln V` at `n`.
    pub fn predict_ln(&self, n: f64) -> f64 {
        let x = match self.model {
            ScalingModel::ExpDecay => n,
            ScalingModel::PowerLaw => n.ln(),
        };
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares in log space.
pub fn fit_scaling(n_list: &[f64], variances: &[f64], model: ScalingModel) -> Result<ScalingFit> {
    if n_list.len() != variances.len() {
        return Err(Error::DimensionMismatch {
            what: "variance list",
            expected: n_list.len(),
            got: variances.len(),
        });
    }
    if n_list.len() < 3 {
        return Err(Error::InvalidArgument("scaling fit needs at least 3 points".into()));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("variance {v} is not strictly positive")));
    }
    if model == ScalingModel::PowerLaw && n_list.iter().any(|&n| n <= 0.0) {
        return Err(Error::InvalidArgument("power-law fit needs positive n".into()));
    }
    let xs: Vec<f64> = match model {
        ScalingModel::ExpDecay => n_list.to_vec(),
        ScalingModel::PowerLaw => n_list.iter().map(|n| n.ln()).collect(),
    };
    let ys: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all n values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * m { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ScalingFit { model, slope, intercept, r_squared })
}
