use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 24;

/// Pure state of `n_qubits` qubits as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros state `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps explicit amplitudes. The length must be a power of two and the
    /// vector must be normalized within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {len} is not 2^n with n >= 1"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_width(n_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "amplitudes are not normalized (squared norm {norm})"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn reset(&mut self) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[0] = Complex64::new(1.0, 0.0);
    }

    fn stride(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies the 2x2 unitary `[[m00, m01], [m10, m11]]` to `qubit`.
    pub(crate) fn apply_1q(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let stride = self.stride(qubit);
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = m[0][0] * x0 + m[0][1] * x1;
                *a1 = m[1][0] * x0 + m[1][1] * x1;
            }
        }
    }

    /// Real-valued rotation, used for RY where all matrix entries are real.
    pub(crate) fn apply_real_1q(&mut self, qubit: usize, c: f64, s: f64) {
        let stride = self.stride(qubit);
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = x0 * c - x1 * s;
                *a1 = x0 * s + x1 * c;
            }
        }
    }

    /// Diagonal single-qubit gate `diag(d0, d1)`.
    pub(crate) fn apply_diag_1q(&mut self, qubit: usize, d0: Complex64, d1: Complex64) {
        let stride = self.stride(qubit);
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            lo.iter_mut().for_each(|a| *a *= d0);
            hi.iter_mut().for_each(|a| *a *= d1);
        }
    }

    pub(crate) fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = self.stride(a) | self.stride(b);
        for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
            if idx & mask == mask {
                *amp = -*amp;
            }
        }
    }

    pub(crate) fn apply_cnot(&mut self, control: usize, target: usize) {
        let cbit = self.stride(control);
        let tbit = self.stride(target);
        for idx in 0..self.amplitudes.len() {
            if idx & cbit != 0 && idx & tbit == 0 {
                self.amplitudes.swap(idx, idx | tbit);
            }
        }
    }
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(())
}

/// Born-rule probabilities `|amplitude_v|^2` for every basis index.
pub fn basis_probabilities(psi: &StateVector) -> Vec<f64> {
    psi.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Measurement record: counts per observed basis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub n_qubits: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl Histogram {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_counts(n_qubits: usize, counts: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let mut hist = Self::new(n_qubits);
        for (idx, c) in counts {
            if c > 0 {
                *hist.counts.entry(idx).or_insert(0) += c;
            }
        }
        hist
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    /// Empirical frequencies as a dense vector of length `2^n`.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let mut freq = vec![0.0; 1 << self.n_qubits];
        for (&idx, &c) in &self.counts {
            freq[idx] = c as f64 / total;
        }
        freq
    }
}

/// Draws `shots` computational-basis measurements of `psi`.
pub fn sample_shots(psi: &StateVector, shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let probs = basis_probabilities(psi);
    let mut rng = rng::stream(seed, &[]);
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut hist = Histogram::new(psi.n_qubits);
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let mut idx = cdf.partition_point(|&c| c <= u);
        // Guard against u landing past the last bucket through rounding, and
        // never report an outcome whose probability is exactly zero.
        idx = idx.min(probs.len() - 1);
        while probs[idx] == 0.0 && idx > 0 {
            idx -= 1;
        }
        *hist.counts.entry(idx).or_insert(0) += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_state() {
        let psi = StateVector::zero(2).unwrap();
        assert_eq!(basis_probabilities(&psi), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(StateVector::zero(0).is_err());
    }

    #[test]
    fn probabilities_ignore_phase() {
        let psi = StateVector::from_amplitudes(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, FRAC_1_SQRT_2),
        ])
        .unwrap();
        let p = basis_probabilities(&psi);
        for (got, want) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn from_amplitudes_rejects_bad_input() {
        assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn big_endian_bit_order() {
        // X on qubit 0 of 3 is RX(pi) up to phase; |000> -> |100> = index 4.
        let mut psi = StateVector::zero(3).unwrap();
        psi.apply_real_1q(0, 0.0, 1.0);
        let p = basis_probabilities(&psi);
        assert!((p[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cnot_and_cz() {
        let mut psi = StateVector::zero(2).unwrap();
        let h = FRAC_1_SQRT_2;
        psi.apply_real_1q(0, h, h); // RY(pi/2) on qubit 0
        psi.apply_cnot(0, 1);
        let p = basis_probabilities(&psi);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[3] - 0.5).abs() < 1e-15);
        psi.apply_cz(0, 1);
        assert!((psi.amplitudes()[3].re + h).abs() < 1e-15);
    }

    #[test]
    fn deterministic_state_shots() {
        let psi = StateVector::zero(3).unwrap();
        let hist = sample_shots(&psi, 100, 1).unwrap();
        assert_eq!(hist.counts.len(), 1);
        assert_eq!(hist.get(0), 100);
        assert!(sample_shots(&psi, 0, 1).is_err());
    }

    #[test]
    fn uniform_shots_within_three_sigma() {
        let h = FRAC_1_SQRT_2;
        let psi = StateVector::from_amplitudes(vec![c(h, 0.0), c(h, 0.0)]).unwrap();
        let shots = 1_000_000u64;
        let hist = sample_shots(&psi, shots, 11).unwrap();
        assert_eq!(hist.total(), shots);
        let band = 3.0 * (shots as f64 * 0.25).sqrt();
        for idx in 0..2 {
            assert!((hist.get(idx) as f64 - 500_000.0).abs() < band);
        }
    }

    #[test]
    fn shots_are_seed_deterministic() {
        let h = 0.5;
        let psi = StateVector::from_amplitudes(vec![c(h, 0.0); 4]).unwrap();
        let a = sample_shots(&psi, 1000, 3).unwrap();
        let b = sample_shots(&psi, 1000, 3).unwrap();
        let d = sample_shots(&psi, 1000, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }
}
