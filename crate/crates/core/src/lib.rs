//! Quantum policy-gradient laboratory.
//!
//! Born policies built on parameterized quantum circuits, parameter-shift
//! gradients, REINFORCE with a baseline, and the trainability diagnostics
//! (log-policy-gradient variance, Fisher information spectra) used to study
//! barren plateaus in PQC-based agents. Everything runs on a dense, exact
//! statevector simulator.

#![allow(clippy::needless_range_loop)]

pub mod agent;
pub mod analysis;
pub mod error;
pub mod grad;
pub mod policy;
pub mod qsim;
pub mod rng;

pub use error::{Error, Result};
