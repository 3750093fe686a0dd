//! Joint pmf estimation from pilot symbols.
//!
//! While the source repeats a known `+1`, a receiver records the sign
//! pattern κ of the signals it hears from the previous group. The sign
//! pattern is the transmitted decision pattern ζ passed through independent
//! per-link sign flips, so `p_κ = P p_ζ`; inverting the Kronecker-factored
//! `P` and projecting back onto the simplex recovers an estimate of `p_ζ`.

use super::{project_simplex, JointPmf, TransitionMatrix};
use crate::{Error, Result};

/// Histogram of joint sign patterns over the pilot block.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotRecords {
    n: usize,
    counts: Vec<u64>,
}

impl PilotRecords {
    pub fn new(n: usize) -> Self {
        PilotRecords { n, counts: vec![0; 1 << n] }
    }

    pub fn from_counts(n: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << n {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for {n} links",
                counts.len()
            )));
        }
        Ok(PilotRecords { n, counts })
    }

    /// Records one pilot from the received samples (`z_i = y_i > 0`).
    pub fn record(&mut self, received: &[f64]) {
        debug_assert_eq!(received.len(), self.n);
        let kappa = received
            .iter()
            .enumerate()
            .fold(0usize, |k, (i, &y)| k | (((y >= 0.0) as usize) << i));
        self.counts[kappa] += 1;
    }

    pub fn record_pattern(&mut self, kappa: usize) {
        self.counts[kappa] += 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Pilot-signal estimate of the previous group's joint decision pmf.
///
/// `per_node_pc[i]` is the probability that the sign of link `i` matches
/// the symbol sent on it.
pub fn estimate_ps(records: &PilotRecords, per_node_pc: &[f64]) -> Result<JointPmf> {
    let total = records.total();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    let t = total as f64;
    let freqs: Vec<f64> = records.counts.iter().map(|&c| c as f64 / t).collect();
    estimate_ps_from_frequencies(&freqs, per_node_pc)
}

/// Same as [`estimate_ps`] but from sign-pattern frequencies directly.
pub fn estimate_ps_from_frequencies(p_kappa_hat: &[f64], per_node_pc: &[f64]) -> Result<JointPmf> {
    let matrix = TransitionMatrix::new(per_node_pc.to_vec())?;
    let b = matrix.solve(p_kappa_hat)?;
    let projected = project_simplex(&b)?;
    let sum: f64 = projected.p_hat.iter().sum();
    JointPmf::new(matrix.n(), projected.p_hat.into_iter().map(|p| p / sum).collect())
}
