//! Exact BER of tiny known-CSI networks.
//!
//! With a fixed fading grid every receiver's samples are Gaussian given the
//! previous group's decisions, and nodes of one group are conditionally
//! independent. The joint pmf of each group therefore follows from the
//! previous one through per-node acceptance probabilities
//! `P(statistic(y) ≥ 0 | x^(k−1))`, which are integrated numerically: a
//! sign-change scan with bisection in the last coordinate and adaptive
//! Simpson over the first.

use super::network::{compile_group, realize_topology, Node, Scratch};
use super::pipeline::{first_group_marginals, GroupKnowledge};
use super::{ChannelMode, CsiRedraw, PmfScheme, SimConfig};
use crate::channel::{ber_first_hop, normal_cdf, normal_pdf, FadingMode};
use crate::detectors::DetectorKind;
use crate::pmf::{majority_threshold, pjp_pmf, product_pmf, JointPmf};
use crate::quad::integrate_panels;
use crate::rng::StreamKey;
use crate::{Error, Result};

const MAX_GROUP: usize = 2;
const MAX_HOPS: usize = 2;
const TOLERANCE: f64 = 1e-8;
const SCAN_POINTS: usize = 240;
const SPAN: f64 = 12.0;

/// Exact BER of `config` by enumerating every group's decision vectors.
///
/// Supports known CSI with a fixed grid, at most two relay groups of at most
/// two nodes, and the sign, MRC, independent-decisions and full MAP
/// detectors. Full MAP with `mcs` uses the exact joint pmfs in place of
/// their Monte Carlo estimates.
pub fn exact_ber_small(config: &SimConfig) -> Result<f64> {
    config.validate()?;
    if config.mode != ChannelMode::KnownCsi || config.csi_redraw != CsiRedraw::PerCampaign {
        return Err(Error::Config("exact evaluation needs known CSI with a per-campaign grid".into()));
    }
    if config.hops() > MAX_HOPS || config.group_sizes.iter().any(|&n| n > MAX_GROUP) {
        return Err(Error::InstanceTooLarge(format!(
            "{} groups of sizes {:?}; the limit is {MAX_HOPS} groups of {MAX_GROUP}",
            config.hops(),
            config.group_sizes
        )));
    }
    if matches!(config.pmf_scheme, Some(PmfScheme::Ps { .. })) {
        return Err(Error::Config("exact evaluation does not model pilot estimation".into()));
    }
    let topo = realize_topology(config, &StreamKey::new(config.seed, &[]))?;
    let k_max = topo.hop_count();
    if k_max == 0 {
        return Ok(ber_first_hop(&topo.hop(1)[0].spec));
    }

    let mut pmf = product_pmf(&first_group_marginals(&topo)?)?;
    for k in 2..=k_max + 1 {
        let knowledge = knowledge(config, &pmf)?;
        let nodes = compile_group(&topo, k, config.detector, Some(&knowledge))?;
        pmf = next_group(&nodes, &pmf)?;
    }
    // the destination's pmf has a single node; index 0 is a wrong decision
    Ok(pmf.prob(0))
}

fn knowledge(config: &SimConfig, pmf: &JointPmf) -> Result<GroupKnowledge> {
    Ok(match (config.detector, config.pmf_scheme) {
        (DetectorKind::FullMap, Some(PmfScheme::Pjp { n_f })) => {
            GroupKnowledge::Joint(pjp_pmf(pmf.n(), n_f.unwrap_or_else(|| majority_threshold(pmf.n())))?)
        }
        (DetectorKind::FullMap, _) => GroupKnowledge::Joint(pmf.clone()),
        (DetectorKind::Id, scheme) => {
            let estimated = pmf.marginals();
            let exchanged = match scheme.and_then(|s| s.quant_bits()) {
                Some(b) => estimated.quantized(b),
                None => estimated.clone(),
            };
            GroupKnowledge::Marginals { estimated, exchanged }
        }
        _ => GroupKnowledge::None,
    })
}

fn next_group(nodes: &[Node], prev: &JointPmf) -> Result<JointPmf> {
    let mut out = vec![0.0; 1 << nodes.len()];
    for (kappa, &p) in prev.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let accept: Vec<f64> = nodes.iter().map(|node| acceptance(node, kappa)).collect::<Result<_>>()?;
        for (idx, slot) in out.iter_mut().enumerate() {
            *slot += p * accept
                .iter()
                .enumerate()
                .map(|(j, &a)| if idx >> j & 1 == 1 { a } else { 1.0 - a })
                .product::<f64>();
        }
    }
    let sum: f64 = out.iter().sum();
    JointPmf::new(nodes.len(), out.into_iter().map(|v| (v / sum).max(0.0)).collect())
}

/// `P(node decides +1 | previous decisions κ)`.
fn acceptance(node: &Node, kappa: usize) -> Result<f64> {
    let mut means = Vec::with_capacity(node.senders.len());
    let mut sigma = 0.0;
    for (&i, spec) in node.senders.iter().zip(&node.specs) {
        let h = match spec.mode() {
            FadingMode::KnownCsi { h } => h,
            FadingMode::KnownStats { .. } => return Err(Error::Config("exact evaluation needs known CSI".into())),
        };
        means.push(if kappa >> i & 1 == 1 { h } else { -h });
        sigma = spec.noise_variance().sqrt();
    }
    let mut scratch = Scratch::default();
    let p = match means.len() {
        1 => line_probability(|t| node.statistic(&[t], &mut scratch) >= 0.0, means[0], sigma),
        2 => {
            let (m1, m2) = (means[0], means[1]);
            let breaks: Vec<f64> = (-10..=10).map(|i| m1 + i as f64 * sigma).collect();
            let mut y = [0.0; 2];
            integrate_panels(
                |t1| {
                    y[0] = t1;
                    let inner = line_probability(
                        |t2| {
                            y[1] = t2;
                            node.statistic(&y, &mut scratch) >= 0.0
                        },
                        m2,
                        sigma,
                    );
                    normal_pdf((t1 - m1) / sigma) / sigma * inner
                },
                &breaks,
                TOLERANCE * 0.1,
            )
        }
        n => return Err(Error::InstanceTooLarge(format!("node with {n} incoming links"))),
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Gaussian measure `N(mean, σ²)` of `{t : accept(t)}`, assuming the set
/// changes membership only between scan points at most once per interval.
fn line_probability<F: FnMut(f64) -> bool>(mut accept: F, mean: f64, sigma: f64) -> f64 {
    let at = |i: usize| mean + sigma * (-SPAN + 2.0 * SPAN * i as f64 / SCAN_POINTS as f64);
    let cdf = |t: f64| normal_cdf((t - mean) / sigma);
    let mut inside = accept(at(0));
    let mut start = if inside { Some(f64::NEG_INFINITY) } else { None };
    let mut total = 0.0;
    for i in 1..=SCAN_POINTS {
        let t = at(i);
        let now = accept(t);
        if now != inside {
            let (mut lo, mut hi) = (at(i - 1), t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if accept(mid) == inside {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let edge = 0.5 * (lo + hi);
            match start.take() {
                Some(s) => total += cdf(edge) - if s.is_finite() { cdf(s) } else { 0.0 },
                None => start = Some(edge),
            }
            inside = now;
        }
    }
    if let Some(s) = start {
        total += 1.0 - if s.is_finite() { cdf(s) } else { 0.0 };
    }
    total
}
