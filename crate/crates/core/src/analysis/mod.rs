//! Barren-plateau diagnostics: ensemble variance of log-policy gradients,
//! Fisher information spectra, and scaling-law fits.

mod eigen;
mod fim;
mod product;
mod scaling;
mod variance;

pub use eigen::{eigen_spectrum, jacobi_eigen, SymmetricEigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};
pub use fim::{concentration_fraction, fim, ActionSampling, FimResult, DEFAULT_CONCENTRATION_THRESHOLD};
pub use product::{product_state_cell, ProductStateStats};
pub use scaling::{fit_scaling, ScalingFit, ScalingModel};
pub use variance::{
    log_grad_variance, sample_moments, ActionRule, ClipRule, DepthRule, Moments, ProbeSlot,
    VarianceEstimate, VarianceScanConfig,
};
