//! Joint pmfs of the hard decisions of a relay group.
//!
//! A pmf over `n` decisions is stored densely with `2^n` entries. Entry `κ`
//! is the probability of the decision vector whose `i`-th symbol is `+1`
//! exactly when bit `i` of `κ` is set, conditioned on the source sending
//! `+1`.

mod mcs;
mod pilot;
mod projection;
mod transition;

pub use mcs::{estimate_mcs, McsGroup, McsNode};
pub use pilot::{estimate_ps, estimate_ps_from_frequencies, PilotRecords};
pub use projection::{project_simplex, ProjectionResult};
pub use transition::{transition_solve, TransitionMatrix};

use serde::{Deserialize, Serialize};

use crate::channel::Symbol;
use crate::{Error, Result};

/// Largest group a dense pmf may describe unless a caller raises the cap.
pub const DEFAULT_MAX_NODES: usize = 20;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    n: usize,
    probs: Vec<f64>,
}

impl JointPmf {
    /// Validates and renormalises `probs` (length `2^n`, nonnegative,
    /// summing to one within 1e−9).
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        Self::with_cap(n, probs, DEFAULT_MAX_NODES)
    }

    pub fn with_cap(n: usize, mut probs: Vec<f64>, cap: usize) -> Result<Self> {
        if n == 0 || n > cap {
            return Err(Error::InvalidPmf(format!("group size {n} outside 1..={cap}")));
        }
        if probs.len() != 1 << n {
            return Err(Error::InvalidPmf(format!(
                "expected {} entries for n = {n}, got {}",
                1usize << n,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidPmf(format!("entry {bad} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(JointPmf { n, probs })
    }

    /// Relative frequencies of observed outcome counts.
    pub fn from_counts(n: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::NoSamples);
        }
        let t = total as f64;
        Self::new(n, counts.iter().map(|&c| c as f64 / t).collect())
    }

    pub fn point_mass(n: usize, index: usize) -> Result<Self> {
        let mut probs = vec![0.0; 1usize.checked_shl(n as u32).unwrap_or(0)];
        if index >= probs.len() {
            return Err(Error::InvalidPmf(format!("index {index} out of range for n = {n}")));
        }
        probs[index] = 1.0;
        Self::new(n, probs)
    }

    /// All decisions correct.
    pub fn all_correct(n: usize) -> Result<Self> {
        Self::point_mass(n, (1 << n) - 1)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let len = 1usize << n;
        Self::new(n, vec![1.0 / len as f64; len])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// The pmf of `−x` under `x = +1`; equal to `P(x | x = −1)` for
    /// symmetric channels.
    pub fn mirror(&self) -> JointPmf {
        JointPmf { n: self.n, probs: self.probs.iter().rev().copied().collect() }
    }

    /// `P(x_i = +1 | x = +1)`.
    pub fn marginal_correct(&self, i: usize) -> f64 {
        let bit = 1 << i;
        self.probs.iter().enumerate().filter(|(k, _)| k & bit != 0).map(|(_, p)| p).sum()
    }

    pub fn marginals(&self) -> MarginalSet {
        MarginalSet { p_correct: (0..self.n).map(|i| self.marginal_correct(i)).collect() }
    }

    /// Joint pmf of the listed nodes; bit `j` of the result is node
    /// `nodes[j]`.
    pub fn marginalize(&self, nodes: &[usize]) -> Result<JointPmf> {
        if nodes.is_empty() || nodes.iter().any(|&i| i >= self.n) {
            return Err(Error::DimensionMismatch(format!(
                "cannot marginalise {nodes:?} out of {} nodes",
                self.n
            )));
        }
        if nodes.len() == self.n && nodes.iter().enumerate().all(|(j, &i)| i == j) {
            return Ok(self.clone());
        }
        let mut out = vec![0.0; 1 << nodes.len()];
        for (k, &p) in self.probs.iter().enumerate() {
            let mut idx = 0;
            for (j, &i) in nodes.iter().enumerate() {
                idx |= ((k >> i) & 1) << j;
            }
            out[idx] += p;
        }
        Ok(JointPmf { n: nodes.len(), probs: out })
    }

    pub fn total_variation(&self, other: &JointPmf) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub(crate) fn sampler(&self) -> PmfSampler {
        let mut acc = 0.0;
        let cdf = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        PmfSampler { cdf }
    }
}

/// Inverse-CDF sampling of outcome indices.
pub(crate) struct PmfSampler {
    cdf: Vec<f64>,
}

impl PmfSampler {
    pub(crate) fn sample(&self, u: f64) -> usize {
        let target = u * self.cdf[self.cdf.len() - 1];
        let i = self.cdf.partition_point(|&c| c <= target);
        // skip zero-probability tail slots left by rounding
        i.min(self.cdf.len() - 1)
    }
}

/// Per-node probabilities of correct decision `P_i = P(x_i = x | x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    p_correct: Vec<f64>,
}

impl MarginalSet {
    pub fn new(p_correct: Vec<f64>) -> Result<Self> {
        if p_correct.is_empty() {
            return Err(Error::InvalidPmf("empty marginal set".into()));
        }
        if let Some(bad) = p_correct.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidPmf(format!("marginal {bad} outside [0, 1]")));
        }
        Ok(MarginalSet { p_correct })
    }

    pub fn n(&self) -> usize {
        self.p_correct.len()
    }

    pub fn p_correct(&self) -> &[f64] {
        &self.p_correct
    }

    pub fn p_error(&self, i: usize) -> f64 {
        1.0 - self.p_correct[i]
    }

    pub fn select(&self, nodes: &[usize]) -> MarginalSet {
        MarginalSet { p_correct: nodes.iter().map(|&i| self.p_correct[i]).collect() }
    }

    pub fn quantized(&self, bits: u32) -> MarginalSet {
        MarginalSet {
            p_correct: self.p_correct.iter().map(|&p| quantize_probability(p, bits)).collect(),
        }
    }
}

/// κ index of a decision vector.
pub fn encode(decisions: &[Symbol]) -> usize {
    decisions.iter().enumerate().map(|(i, s)| s.bit() << i).sum()
}

/// κ index of a vector of ±1 integers.
pub fn encode_values(values: &[i64]) -> Result<usize> {
    let symbols = values.iter().map(|&v| Symbol::try_from(v)).collect::<Result<Vec<_>>>()?;
    Ok(encode(&symbols))
}

pub fn decode(index: usize, n: usize) -> Vec<Symbol> {
    (0..n).map(|i| Symbol::from_bit(index >> i & 1 == 1)).collect()
}

/// Joint pmf of independent decisions with the given marginals.
pub fn product_pmf(marginals: &MarginalSet) -> Result<JointPmf> {
    let mut probs = vec![1.0];
    for &pc in marginals.p_correct() {
        let mut next = Vec::with_capacity(probs.len() * 2);
        next.extend(probs.iter().map(|p| p * (1.0 - pc)));
        next.extend(probs.iter().map(|p| p * pc));
        probs = next;
    }
    JointPmf::new(marginals.n(), probs)
}

/// Uniform mass on every outcome with at least `n_f` correct decisions.
pub fn pjp_pmf(n: usize, n_f: usize) -> Result<JointPmf> {
    if n_f > n {
        return Err(Error::InvalidPmf(format!("n_f = {n_f} exceeds group size {n}")));
    }
    let len = 1usize << n;
    let count = (0..len).filter(|k| k.count_ones() as usize >= n_f).count();
    let p = 1.0 / count as f64;
    JointPmf::new(
        n,
        (0..len).map(|k| if k.count_ones() as usize >= n_f { p } else { 0.0 }).collect(),
    )
}

/// Strict majority `⌈(n+1)/2⌉`.
pub fn majority_threshold(n: usize) -> usize {
    (n + 2) / 2
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Per-outcome probability at each number of correct decisions, assuming
/// the pmf is exchangeable: entry `w` is the mass on weight-`w` outcomes
/// divided by `C(n, w)`.
pub fn compress_symmetric(pmf: &JointPmf) -> Vec<f64> {
    let n = pmf.n();
    let mut mass = vec![0.0; n + 1];
    for (k, p) in pmf.probs().iter().enumerate() {
        mass[k.count_ones() as usize] += p;
    }
    mass.iter().enumerate().map(|(w, m)| m / binomial(n, w)).collect()
}

/// Inverse of [`compress_symmetric`].
pub fn expand_symmetric(weights: &[f64]) -> Result<JointPmf> {
    let n = weights.len().saturating_sub(1);
    JointPmf::new(n, (0..1usize << n).map(|k| weights[k.count_ones() as usize]).collect())
}

/// Nearest of the `2^bits` levels `k / (2^bits − 1)`; ties round up.
pub fn quantize_probability(p: f64, bits: u32) -> f64 {
    let levels = ((1u64 << bits.min(52)) - 1) as f64;
    ((p.clamp(0.0, 1.0) * levels + 0.5).floor() / levels).min(1.0)
}

/// Entrywise mean of several estimates of the same pmf.
pub fn average_pmfs(estimates: &[JointPmf]) -> Result<JointPmf> {
    let first = estimates.first().ok_or(Error::NoSamples)?;
    if estimates.iter().any(|e| e.n() != first.n()) {
        return Err(Error::DimensionMismatch("estimates have different sizes".into()));
    }
    let mut acc = vec![0.0; first.probs().len()];
    for e in estimates {
        acc.iter_mut().zip(e.probs()).for_each(|(a, p)| *a += p);
    }
    let sum: f64 = acc.iter().sum();
    JointPmf::new(first.n(), acc.into_iter().map(|a| a / sum).collect())
}
