//! Group-by-group side information used by the detectors.
//!
//! Entry `k−1` describes the decisions of relay group `k` given `x = +1`.
//! Group 1 always comes from closed forms: its nodes hear the source
//! directly, decide independently and err with the single-link sign error.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::network::{compile_group, Node, Scratch};
use super::{PmfScheme, SimConfig};
use crate::channel::{ber_first_hop, sample_value, ChannelSpec, Symbol};
use crate::detectors::{id_statistic, DetectorKind};
use crate::pmf::{
    estimate_mcs, estimate_ps, majority_threshold, pjp_pmf, product_pmf, JointPmf, MarginalSet, McsGroup,
    McsNode, PilotRecords,
};
use crate::rng::{site, StreamKey};
use crate::topology::NetworkTopology;
use crate::{Error, Result};

const CHUNK: u64 = 4096;
const OBSERVER: u64 = 0x6f62;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKnowledge {
    /// The detector needs nothing about this group.
    None,
    Joint(JointPmf),
    /// Marginals as computed and as sent to the next group (after
    /// quantisation, if any).
    Marginals { estimated: MarginalSet, exchanged: MarginalSet },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PmfPipeline {
    groups: Vec<GroupKnowledge>,
}

impl PmfPipeline {
    pub fn empty(groups: usize) -> Self {
        PmfPipeline { groups: vec![GroupKnowledge::None; groups] }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Knowledge about relay group `k` (1-based).
    pub fn group(&self, k: usize) -> &GroupKnowledge {
        &self.groups[k - 1]
    }

    pub fn groups(&self) -> &[GroupKnowledge] {
        &self.groups
    }

    /// The first `k` groups.
    pub fn truncated(&self, k: usize) -> PmfPipeline {
        PmfPipeline { groups: self.groups[..k].to_vec() }
    }
}

/// Probabilities of correct decision of group 1.
pub fn first_group_marginals(topo: &NetworkTopology) -> Result<MarginalSet> {
    MarginalSet::new(
        (0..topo.group_size(1)).map(|j| 1.0 - ber_first_hop(&topo.incoming(1, j)[0].spec)).collect(),
    )
}

/// Builds the side information for every relay group of `topo`.
pub fn build_pipeline(config: &SimConfig, topo: &NetworkTopology, base: &StreamKey) -> Result<PmfPipeline> {
    let k_max = topo.hop_count();
    if k_max == 0 {
        return Ok(PmfPipeline::empty(0));
    }
    let groups = match config.pmf_scheme {
        None => vec![GroupKnowledge::None; k_max],
        Some(PmfScheme::Pjp { n_f }) => (1..=k_max)
            .map(|k| {
                let n = topo.group_size(k);
                pjp_pmf(n, n_f.unwrap_or_else(|| majority_threshold(n))).map(GroupKnowledge::Joint)
            })
            .collect::<Result<_>>()?,
        Some(PmfScheme::Mcs { samples }) => mcs_groups(topo, samples, base)?,
        Some(PmfScheme::Ps { pilots }) => ps_groups(topo, pilots, base)?,
        Some(PmfScheme::Id { samples, quant_bits }) => id_groups(topo, samples, quant_bits, base)?,
    };
    Ok(PmfPipeline { groups })
}

fn joint(k: &GroupKnowledge) -> &JointPmf {
    match k {
        GroupKnowledge::Joint(p) => p,
        _ => unreachable!("joint-pmf pipeline holds joint pmfs"),
    }
}

fn mcs_groups(topo: &NetworkTopology, samples: u64, base: &StreamKey) -> Result<Vec<GroupKnowledge>> {
    let key = base.child(site::MCS);
    let mut groups = vec![GroupKnowledge::Joint(product_pmf(&first_group_marginals(topo)?)?)];
    for k in 2..=topo.hop_count() {
        let nodes = compile_group(topo, k, DetectorKind::FullMap, Some(&groups[k - 2]))?;
        let group = McsGroup {
            prev_n: topo.group_size(k - 1),
            nodes: nodes.iter().map(|n| McsNode { senders: n.senders.clone(), links: n.specs.clone() }).collect(),
        };
        let pmf = estimate_mcs(
            &group,
            joint(&groups[k - 2]),
            |j, y, s: &mut Scratch| nodes[j].decide(y, s),
            Symbol::Plus,
            samples,
            &key.child(k as u64),
        )?;
        groups.push(GroupKnowledge::Joint(pmf));
    }
    Ok(groups)
}

/// Pilot-signal pipeline. The network is run on `pilots` known `+1`
/// symbols; each pilot's decisions are carried forward group by group, and
/// group `k`'s pmf is estimated from the signs one receiver of hop `k+1`
/// sees. That receiver uses, for every sender, the sender's first outgoing
/// link.
fn ps_groups(topo: &NetworkTopology, pilots: u64, base: &StreamKey) -> Result<Vec<GroupKnowledge>> {
    if pilots == 0 {
        return Err(Error::NoSamples);
    }
    let key = base.child(site::PILOT);
    let first = compile_group(topo, 1, DetectorKind::FullMap, None)?;
    let mut particles = advance(&first, None, pilots, &key.child(1));
    let mut groups = vec![GroupKnowledge::Joint(product_pmf(&first_group_marginals(topo)?)?)];
    for k in 2..=topo.hop_count() {
        let nodes = compile_group(topo, k, DetectorKind::FullMap, Some(&groups[k - 2]))?;
        particles = advance(&nodes, Some(&particles), pilots, &key.child(k as u64));
        groups.push(GroupKnowledge::Joint(observe(topo, k, &particles, &key.child(k as u64).child(OBSERVER))?));
    }
    Ok(groups)
}

/// Decisions of `nodes` for every pilot; `prev = None` means the source.
fn advance(nodes: &[Node], prev: Option<&[u32]>, pilots: u64, key: &StreamKey) -> Vec<u32> {
    let chunks = pilots.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = Scratch::default();
            let mut y = Vec::new();
            (c * CHUNK..((c + 1) * CHUNK).min(pilots))
                .map(|s| {
                    let mut rng = key.stream(s);
                    let bits = prev.map_or(1, |p| p[s as usize]);
                    let mut out = 0u32;
                    for (j, node) in nodes.iter().enumerate() {
                        y.clear();
                        for (&i, spec) in node.senders.iter().zip(&node.specs) {
                            y.push(sample_value(Symbol::from_bit(bits >> i & 1 == 1), spec, &mut rng));
                        }
                        out |= (node.decide(&y, &mut scratch).bit() as u32) << j;
                    }
                    out
                })
                .collect::<Vec<u32>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

fn observe(topo: &NetworkTopology, k: usize, particles: &[u32], key: &StreamKey) -> Result<JointPmf> {
    let n = topo.group_size(k);
    let links: Vec<ChannelSpec> = (0..n)
        .map(|i| {
            topo.hop(k + 1)
                .iter()
                .filter(|l| l.from == i)
                .min_by_key(|l| l.to)
                .map(|l| l.spec)
                .ok_or_else(|| Error::InvalidTopology(format!("node {i} of group {k} has no outgoing link")))
        })
        .collect::<Result<_>>()?;
    let pcs: Vec<f64> = links.iter().map(|l| 1.0 - ber_first_hop(l)).collect();
    let m = particles.len() as u64;
    let counts = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut hist = vec![0u64; 1 << n];
            for s in c * CHUNK..((c + 1) * CHUNK).min(m) {
                let mut rng = key.stream(s);
                let bits = particles[s as usize];
                let mut kappa = 0usize;
                for (i, spec) in links.iter().enumerate() {
                    let y = sample_value(Symbol::from_bit(bits >> i & 1 == 1), spec, &mut rng);
                    kappa |= ((y >= 0.0) as usize) << i;
                }
                hist[kappa] += 1;
            }
            hist
        })
        .reduce(
            || vec![0u64; 1 << n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    estimate_ps(&PilotRecords::from_counts(n, counts)?, &pcs)
}

fn id_groups(
    topo: &NetworkTopology,
    samples: u64,
    quant_bits: Option<u32>,
    base: &StreamKey,
) -> Result<Vec<GroupKnowledge>> {
    let key = base.child(site::ID_RECURSION);
    let exchange = |m: &MarginalSet| match quant_bits {
        Some(b) => m.quantized(b),
        None => m.clone(),
    };
    let first = first_group_marginals(topo)?;
    let mut groups = vec![GroupKnowledge::Marginals { exchanged: exchange(&first), estimated: first }];
    for k in 2..=topo.hop_count() {
        let (estimated, exchanged) = match &groups[k - 2] {
            GroupKnowledge::Marginals { estimated, exchanged } => (estimated, exchanged),
            _ => unreachable!("independence pipeline holds marginals"),
        };
        // nodes with identical inputs share one estimate
        let mut seen: Vec<(Vec<ChannelSpec>, MarginalSet, MarginalSet, f64)> = Vec::new();
        let mut pcs = Vec::with_capacity(topo.group_size(k));
        for j in 0..topo.group_size(k) {
            let links = topo.incoming(k, j);
            let senders: Vec<usize> = links.iter().map(|l| l.from).collect();
            let specs: Vec<ChannelSpec> = links.iter().map(|l| l.spec).collect();
            let truth = estimated.select(&senders);
            let used = exchanged.select(&senders);
            let hit = seen.iter().find(|(s, t, u, _)| *s == specs && *t == truth && *u == used);
            let pc = match hit {
                Some(&(.., pc)) => pc,
                None => {
                    let err = recursive_error_probability(
                        &specs,
                        &truth,
                        &used,
                        samples,
                        &key.child(k as u64).child(j as u64),
                    )?;
                    seen.push((specs, truth, used, 1.0 - err));
                    1.0 - err
                }
            };
            pcs.push(pc);
        }
        let estimated = MarginalSet::new(pcs)?;
        groups.push(GroupKnowledge::Marginals { exchanged: exchange(&estimated), estimated });
    }
    Ok(groups)
}

/// Monte Carlo estimate of `P(l < 0 | x = +1)` for a node combining its
/// links with the independent-decisions rule.
///
/// Sender `i` is correct with probability `truth[i]`, independently of the
/// others; the node weighs it with `used[i]`. A tie `l = 0` is decided
/// `+1`, which is wrong for half of the source symbols, so it counts as
/// half an error.
pub fn recursive_error_probability(
    links: &[ChannelSpec],
    truth: &MarginalSet,
    used: &MarginalSet,
    samples: u64,
    key: &StreamKey,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    if truth.n() != links.len() || used.n() != links.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} links with {} and {} marginals",
            links.len(),
            truth.n(),
            used.n()
        )));
    }
    let llr: Vec<_> = links.iter().map(ChannelSpec::llr_fn).collect();
    let half_errors: u64 = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut lam = vec![0.0; links.len()];
            let mut count = 0u64;
            for s in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut rng = key.stream(s);
                for (i, spec) in links.iter().enumerate() {
                    let u: f64 = rng.random();
                    let x = if u < truth.p_correct()[i] { Symbol::Plus } else { Symbol::Minus };
                    lam[i] = llr[i].eval(sample_value(x, spec, &mut rng));
                }
                let l = id_statistic(used.p_correct(), &lam);
                count += if l < 0.0 { 2 } else if l == 0.0 { 1 } else { 0 };
            }
            count
        })
        .sum();
    Ok(half_errors as f64 / (2 * samples) as f64)
}
