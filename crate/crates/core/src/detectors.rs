//! Decision rules of relays and the destination.
//!
//! Every rule reduces to the sign of a statistic with the tie `sgn(0) = +1`.
//! Per-link information enters only through the link LLR
//! `λ_i = log f(y_i|+1) − log f(y_i|−1)`, because
//! `log f(y_i | x_i) = log f(y_i | −1) + z_i λ_i` with `z_i = (x_i + 1)/2`.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, Observation, Symbol};
use crate::pmf::{pjp_pmf, JointPmf, MarginalSet};
use crate::{Error, Result};

/// Detector family used by every node past the first relay group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Sign of the single incoming sample.
    FirstGroupSign,
    /// MAP rule with an explicit joint pmf of the previous group.
    FullMap,
    /// MAP rule under the independent-decisions approximation.
    Id,
    /// Maximal-ratio combining.
    Mrc,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::FirstGroupSign => "first_group_sign",
            DetectorKind::FullMap => "full_map",
            DetectorKind::Id => "id",
            DetectorKind::Mrc => "mrc",
        }
    }
}

/// Everything a node knows when it decides.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext<'a> {
    pub received: &'a [Observation],
    pub link_specs: &'a [ChannelSpec],
    pub prev_pmf: Option<&'a JointPmf>,
    pub prev_marginals: Option<&'a MarginalSet>,
}

impl<'a> DecisionContext<'a> {
    pub fn new(received: &'a [Observation], link_specs: &'a [ChannelSpec]) -> Self {
        DecisionContext { received, link_specs, prev_pmf: None, prev_marginals: None }
    }

    pub fn with_pmf(mut self, pmf: &'a JointPmf) -> Self {
        self.prev_pmf = Some(pmf);
        self
    }

    pub fn with_marginals(mut self, marginals: &'a MarginalSet) -> Self {
        self.prev_marginals = Some(marginals);
        self
    }

    fn llrs(&self) -> Result<Vec<f64>> {
        if self.received.len() != self.link_specs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} links",
                self.received.len(),
                self.link_specs.len()
            )));
        }
        Ok(self.received.iter().zip(self.link_specs).map(|(y, s)| s.llr(y.value)).collect())
    }
}

pub fn detect_first_group(y: Observation) -> Symbol {
    Symbol::from_sign(y.value)
}

/// `log L` of the MAP rule for the context's joint pmf.
pub fn map_log_ratio(ctx: &DecisionContext<'_>) -> Result<f64> {
    let pmf = ctx.prev_pmf.ok_or(Error::MissingSideInfo("a joint pmf of the previous group"))?;
    let llrs = ctx.llrs()?;
    if pmf.n() != llrs.len() {
        return Err(Error::DimensionMismatch(format!(
            "pmf over {} nodes for {} links",
            pmf.n(),
            llrs.len()
        )));
    }
    Ok(map_statistic(pmf.probs(), &llrs, &mut Vec::new()))
}

pub fn map_detect(ctx: &DecisionContext<'_>) -> Result<Symbol> {
    map_log_ratio(ctx).map(Symbol::from_sign)
}

/// Overall log-likelihood `l_j` of the independent-decisions rule.
pub fn id_log_ratio(ctx: &DecisionContext<'_>) -> Result<f64> {
    let marginals =
        ctx.prev_marginals.ok_or(Error::MissingSideInfo("marginals of the previous group"))?;
    let llrs = ctx.llrs()?;
    if marginals.n() != llrs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} marginals for {} links",
            marginals.n(),
            llrs.len()
        )));
    }
    Ok(id_statistic(marginals.p_correct(), &llrs))
}

pub fn id_detect(ctx: &DecisionContext<'_>) -> Result<Symbol> {
    id_log_ratio(ctx).map(Symbol::from_sign)
}

/// MAP rule with the predefined pmf that is uniform over outcomes with at
/// least `n_f` correct decisions.
pub fn pjp_detect(ctx: &DecisionContext<'_>, n_f: usize) -> Result<Symbol> {
    let pmf = pjp_pmf(ctx.link_specs.len(), n_f)?;
    map_detect(&DecisionContext { prev_pmf: Some(&pmf), ..*ctx })
}

/// `sgn(Σ w_i y_i)` with `w_i = h_i` (known CSI) or `σ_{h,i}²`.
pub fn mrc_detect(ctx: &DecisionContext<'_>) -> Result<Symbol> {
    if ctx.received.len() != ctx.link_specs.len() {
        return Err(Error::DimensionMismatch("observations and links differ".into()));
    }
    let s: f64 = ctx.received.iter().zip(ctx.link_specs).map(|(y, l)| l.mrc_weight() * y.value).sum();
    Ok(Symbol::from_sign(s))
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `Σ_i [log(e^{λ_i} P_i + P̄_i) − log(P_i + e^{λ_i} P̄_i)]`, evaluated in
/// the log domain.
pub fn id_statistic(p_correct: &[f64], llrs: &[f64]) -> f64 {
    p_correct
        .iter()
        .zip(llrs)
        .map(|(&p, &l)| {
            if p == 0.5 {
                return 0.0;
            }
            let lp = p.ln();
            let lq = (1.0 - p).ln();
            log_add(l + lp, lq) - log_add(lp, l + lq)
        })
        .sum()
}

/// `log Σ_κ p(κ) e^{⟨z(κ), λ⟩} − log Σ_κ p(κ̄) e^{⟨z(κ), λ⟩}` where `κ̄` is
/// the bitwise complement.
///
/// Each per-link factor is shifted by `max(λ_i, 0)` so that the largest
/// product is exactly one; the shift cancels in the ratio. If a sum still
/// underflows the evaluation falls back to log-sum-exp over the support.
pub fn map_statistic(probs: &[f64], llrs: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let n = llrs.len();
    debug_assert_eq!(probs.len(), 1 << n);
    scratch.clear();
    scratch.reserve(1 << n);
    scratch.push(1.0);
    for &l in llrs {
        let shift = l.max(0.0);
        let on = (l - shift).exp();
        let off = (-shift).exp();
        let len = scratch.len();
        for k in 0..len {
            let w = scratch[k];
            scratch[k] = w * off;
            scratch.push(w * on);
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &w) in scratch.iter().enumerate() {
        num += probs[k] * w;
        den += probs[probs.len() - 1 - k] * w;
    }
    if num > f64::MIN_POSITIVE && den > f64::MIN_POSITIVE && num.is_finite() && den.is_finite() {
        return num.ln() - den.ln();
    }
    map_statistic_log_domain(probs, llrs)
}

fn map_statistic_log_domain(probs: &[f64], llrs: &[f64]) -> f64 {
    let last = probs.len() - 1;
    let mut num = f64::NEG_INFINITY;
    let mut den = f64::NEG_INFINITY;
    for k in 0..probs.len() {
        let s: f64 = llrs.iter().enumerate().filter(|(i, _)| k >> i & 1 == 1).map(|(_, l)| l).sum();
        if probs[k] > 0.0 {
            num = log_add(num, probs[k].ln() + s);
        }
        if probs[last - k] > 0.0 {
            den = log_add(den, probs[last - k].ln() + s);
        }
    }
    num - den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::likelihood_csi;
    use crate::pmf::{decode, product_pmf};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(v: &[f64]) -> Vec<Observation> {
        v.iter().map(|&value| Observation { value }).collect()
    }

    #[test]
    fn first_group_sign() {
        assert_eq!(detect_first_group(Observation { value: 0.3 }), Symbol::Plus);
        assert_eq!(detect_first_group(Observation { value: -0.3 }), Symbol::Minus);
        assert_eq!(detect_first_group(Observation { value: 0.0 }), Symbol::Plus);
    }

    #[test]
    fn map_point_mass_reduces_to_link_llr() {
        let spec = [ChannelSpec::known_stats(1.0, 0.5).unwrap()];
        let pmf = JointPmf::all_correct(1).unwrap();
        for y in [-3.0, -0.2, 0.4, 2.5] {
            let o = obs(&[y]);
            let ctx = DecisionContext::new(&o, &spec).with_pmf(&pmf);
            let l = map_log_ratio(&ctx).unwrap();
            assert!((l - spec[0].llr(y)).abs() < 1e-12);
            assert_eq!(map_detect(&ctx).unwrap(), Symbol::from_sign(y));
        }
    }

    #[test]
    fn map_uniform_is_a_tie() {
        let specs = vec![ChannelSpec::known_csi(0.7, 1.0).unwrap(); 3];
        let pmf = JointPmf::uniform(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let o = obs(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
            let ctx = DecisionContext::new(&o, &specs).with_pmf(&pmf);
            assert_eq!(map_log_ratio(&ctx).unwrap(), 0.0);
            assert_eq!(map_detect(&ctx).unwrap(), Symbol::Plus);
        }
    }

    #[test]
    fn map_requires_pmf_and_matching_sizes() {
        let specs = vec![ChannelSpec::known_csi(1.0, 1.0).unwrap(); 2];
        let o = obs(&[0.1, 0.2]);
        assert!(matches!(map_detect(&DecisionContext::new(&o, &specs)), Err(Error::MissingSideInfo(_))));
        let pmf = JointPmf::uniform(3).unwrap();
        assert!(map_detect(&DecisionContext::new(&o, &specs).with_pmf(&pmf)).is_err());
        let short = obs(&[0.1]);
        let pmf2 = JointPmf::uniform(2).unwrap();
        assert!(map_detect(&DecisionContext::new(&short, &specs).with_pmf(&pmf2)).is_err());
    }

    #[test]
    fn map_matches_direct_double_sum() {
        // brute-force ratio of mixtures using raw Gaussian densities
        let h = [0.9, 1.4];
        let sigma_sq = 0.8;
        let specs: Vec<_> = h.iter().map(|&h| ChannelSpec::known_csi(h, sigma_sq).unwrap()).collect();
        let pmf = JointPmf::new(2, vec![0.05, 0.15, 0.1, 0.7]).unwrap();
        let mirrored = pmf.mirror();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100_000 {
            let y = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..4 {
                let xs = decode(k, 2);
                let f: f64 = (0..2).map(|i| likelihood_csi(y[i], h[i], xs[i], sigma_sq)).product();
                num += pmf.prob(k) * f;
                den += mirrored.prob(k) * f;
            }
            let direct = (num / den).ln();
            let o = obs(&y);
            let fast = map_log_ratio(&DecisionContext::new(&o, &specs).with_pmf(&pmf)).unwrap();
            assert!((direct - fast).abs() < 1e-9 * (1.0 + direct.abs()), "{direct} vs {fast}");
            if direct.abs() > 1e-9 {
                assert_eq!(Symbol::from_sign(direct), Symbol::from_sign(fast));
            }
        }
    }

    #[test]
    fn map_log_domain_fallback_agrees() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        for llrs in [[3.0, -1.0], [-800.0, 900.0], [2000.0, 2000.0], [-2000.0, -1500.0]] {
            let fast = map_statistic(&probs, &llrs, &mut Vec::new());
            let slow = map_statistic_log_domain(&probs, &llrs);
            assert!(fast.is_finite());
            assert!((fast - slow).abs() < 1e-9 * (1.0 + slow.abs()), "{llrs:?}: {fast} vs {slow}");
        }
    }

    #[test]
    fn id_limits() {
        let llrs = [0.7, -2.1, 1.3];
        assert!((id_statistic(&[1.0; 3], &llrs) - llrs.iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(id_statistic(&[0.5], &[4.2]), 0.0);
        let with = id_statistic(&[0.9, 0.5], &[1.0, -7.0]);
        let without = id_statistic(&[0.9], &[1.0]);
        assert_eq!(with, without);
        let specs = vec![ChannelSpec::known_csi(1.0, 1.0).unwrap(); 1];
        let o = obs(&[1.0]);
        assert!(id_detect(&DecisionContext::new(&o, &specs)).is_err());
    }

    #[test]
    fn id_agrees_with_map_under_product_pmf() {
        let specs = vec![ChannelSpec::known_csi(1.0, 1.0).unwrap(), ChannelSpec::known_csi(0.6, 1.0).unwrap()];
        let m = MarginalSet::new(vec![0.9, 0.9]).unwrap();
        let prod = product_pmf(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100_000 {
            let o = obs(&[rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]);
            let ctx = DecisionContext::new(&o, &specs);
            assert_eq!(
                id_detect(&ctx.with_marginals(&m)).unwrap(),
                map_detect(&ctx.with_pmf(&prod)).unwrap()
            );
        }
    }

    #[test]
    fn pjp_special_cases() {
        let specs = vec![ChannelSpec::known_stats(1.0, 0.5).unwrap(); 3];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let o = obs(&y);
            let ctx = DecisionContext::new(&o, &specs);
            let sum: f64 = y.iter().zip(&specs).map(|(y, s)| s.llr(*y)).sum();
            assert_eq!(pjp_detect(&ctx, 3).unwrap(), Symbol::from_sign(sum));
            assert_eq!(pjp_detect(&ctx, 0).unwrap(), Symbol::Plus);
            let explicit = pjp_pmf(3, 2).unwrap();
            assert_eq!(pjp_detect(&ctx, 2).unwrap(), map_detect(&ctx.with_pmf(&explicit)).unwrap());
        }
    }

    #[test]
    fn mrc_examples() {
        let one = [ChannelSpec::known_csi(0.4, 1.0).unwrap()];
        for y in [-1.0, 0.0, 2.0] {
            let o = obs(&[y]);
            assert_eq!(mrc_detect(&DecisionContext::new(&o, &one)).unwrap(), detect_first_group(o[0]));
        }
        let two = [ChannelSpec::known_csi(2.0, 1.0).unwrap(), ChannelSpec::known_csi(1.0, 1.0).unwrap()];
        let o = obs(&[-0.4, 1.0]);
        assert_eq!(mrc_detect(&DecisionContext::new(&o, &two)).unwrap(), Symbol::Plus);
        let eq = vec![ChannelSpec::known_stats(1.0, 1.0).unwrap(); 3];
        let o = obs(&[-0.5, 0.2, 0.2]);
        assert_eq!(mrc_detect(&DecisionContext::new(&o, &eq)).unwrap(), Symbol::Minus);
    }

    proptest! {
        #[test]
        fn detectors_are_antisymmetric(
            ys in prop::collection::vec(-6.0f64..6.0, 3),
            raw in prop::collection::vec(0.01f64..1.0, 8),
            pc in prop::collection::vec(0.5f64..1.0, 3),
            stats in any::<bool>(),
        ) {
            let specs: Vec<_> = (0..3).map(|i| if stats {
                ChannelSpec::known_stats(1.0 + i as f64 * 0.3, 0.7).unwrap()
            } else {
                ChannelSpec::known_csi(0.5 + i as f64 * 0.4, 0.7).unwrap()
            }).collect();
            let s: f64 = raw.iter().sum();
            let pmf = JointPmf::new(3, raw.iter().map(|r| r / s).collect()).unwrap();
            let m = MarginalSet::new(pc).unwrap();
            let pos = obs(&ys);
            let neg: Vec<_> = ys.iter().map(|y| Observation { value: -y }).collect();
            let a = DecisionContext::new(&pos, &specs).with_pmf(&pmf).with_marginals(&m);
            let b = DecisionContext::new(&neg, &specs).with_pmf(&pmf).with_marginals(&m);

            let la = map_log_ratio(&a).unwrap();
            let lb = map_log_ratio(&b).unwrap();
            prop_assert!((la + lb).abs() < 1e-9 * (1.0 + la.abs()));
            if la.abs() > 1e-9 {
                prop_assert_eq!(map_detect(&a).unwrap(), -map_detect(&b).unwrap());
            }
            let ia = id_log_ratio(&a).unwrap();
            if ia.abs() > 1e-9 {
                prop_assert_eq!(id_detect(&a).unwrap(), -id_detect(&b).unwrap());
            }
            let ma: f64 = ys.iter().zip(&specs).map(|(y, s)| s.mrc_weight() * y).sum();
            if ma.abs() > 1e-12 {
                prop_assert_eq!(mrc_detect(&a).unwrap(), -mrc_detect(&b).unwrap());
            }
        }
    }
}
