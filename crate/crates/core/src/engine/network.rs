//! Link realisation and per-node decision rules ready for simulation.

use rand::Rng;

use super::pipeline::{GroupKnowledge, PmfPipeline};
use super::{ChannelMode, SimConfig};
use crate::channel::{db_to_linear, rayleigh, sample_value, ChannelSpec, LinkLlr, Symbol};
use crate::detectors::{id_statistic, map_statistic, DetectorKind};
use crate::rng::{site, StreamKey};
use crate::topology::{NetworkTopology, TopologyKind};
use crate::{Error, Result};

/// Stream index of the fading draw of link `(hop, from, to)`.
fn link_index(hop: usize, from: usize, to: usize) -> u64 {
    ((hop as u64) << 40) | ((from as u64) << 20) | to as u64
}

/// Builds the topology of `config` with every link's channel.
///
/// Known-CSI envelopes are drawn from `base`, one stream per link, so two
/// networks that share a link also share its fading value.
pub fn realize_topology(config: &SimConfig, base: &StreamKey) -> Result<NetworkTopology> {
    let snr = db_to_linear(config.snr_db);
    let noise = 1.0 / snr;
    let grid = base.child(site::GRID);
    let factory = |hop: usize, from: usize, to: usize| -> Result<ChannelSpec> {
        match config.mode {
            ChannelMode::KnownStats => ChannelSpec::known_stats(1.0, noise),
            ChannelMode::KnownCsi => {
                let h = rayleigh(1.0, &mut grid.stream(link_index(hop, from, to)));
                ChannelSpec::known_csi(h, noise)
            }
        }
    };
    let k = config.hops();
    if k == 0 {
        return Ok(NetworkTopology::direct_link(factory(1, 0, 0)?));
    }
    match config.topology {
        TopologyKind::Mesh => NetworkTopology::build_mesh(k, &config.group_sizes, factory),
        TopologyKind::Multihop => NetworkTopology::build_multihop(k, config.group_sizes[0], factory),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Rule {
    Sign,
    Map(Vec<f64>),
    Id(Vec<f64>),
    Mrc(Vec<f64>),
}

#[derive(Default)]
pub(crate) struct Scratch {
    llr: Vec<f64>,
    weights: Vec<f64>,
}

/// A receiving node: its senders in the previous group, their links and its
/// decision rule.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Node {
    pub senders: Vec<usize>,
    pub specs: Vec<ChannelSpec>,
    llr: Vec<LinkLlr>,
    rule: Rule,
}

impl Node {
    fn new(senders: Vec<usize>, specs: Vec<ChannelSpec>, rule: Rule) -> Node {
        let llr = specs.iter().map(ChannelSpec::llr_fn).collect();
        Node { senders, specs, llr, rule }
    }

    /// Decision statistic; the node decides `+1` when it is `≥ 0`.
    pub fn statistic(&self, y: &[f64], scratch: &mut Scratch) -> f64 {
        match &self.rule {
            Rule::Sign => y[0],
            Rule::Mrc(w) => w.iter().zip(y).map(|(w, y)| w * y).sum(),
            Rule::Map(p) => {
                self.fill_llr(y, scratch);
                map_statistic(p, &scratch.llr, &mut scratch.weights)
            }
            Rule::Id(p) => {
                self.fill_llr(y, scratch);
                id_statistic(p, &scratch.llr)
            }
        }
    }

    #[inline]
    pub fn decide(&self, y: &[f64], scratch: &mut Scratch) -> Symbol {
        Symbol::from_sign(self.statistic(y, scratch))
    }

    fn fill_llr(&self, y: &[f64], scratch: &mut Scratch) {
        scratch.llr.clear();
        scratch.llr.extend(self.llr.iter().zip(y).map(|(f, &y)| f.eval(y)));
    }
}

/// Decision rules of the receivers of hop `k` (group `k`, or the destination
/// when `k = K+1`), given what is known about group `k−1`.
pub(crate) fn compile_group(
    topo: &NetworkTopology,
    k: usize,
    detector: DetectorKind,
    prev: Option<&GroupKnowledge>,
) -> Result<Vec<Node>> {
    (0..topo.group_size(k))
        .map(|j| {
            let links = topo.incoming(k, j);
            let senders: Vec<usize> = links.iter().map(|l| l.from).collect();
            let specs: Vec<ChannelSpec> = links.iter().map(|l| l.spec).collect();
            let rule = if k == 1 {
                Rule::Sign
            } else {
                match detector {
                    DetectorKind::FirstGroupSign if senders.len() == 1 => Rule::Sign,
                    DetectorKind::FirstGroupSign => {
                        return Err(Error::Config(
                            "first_group_sign needs a single incoming link at every node".into(),
                        ))
                    }
                    DetectorKind::Mrc => Rule::Mrc(specs.iter().map(ChannelSpec::mrc_weight).collect()),
                    DetectorKind::FullMap => match prev {
                        Some(GroupKnowledge::Joint(pmf)) => Rule::Map(pmf.marginalize(&senders)?.probs().to_vec()),
                        _ => return Err(Error::MissingSideInfo("a joint pmf of the previous group")),
                    },
                    DetectorKind::Id => match prev {
                        Some(GroupKnowledge::Marginals { exchanged, .. }) => {
                            Rule::Id(exchanged.select(&senders).p_correct().to_vec())
                        }
                        _ => return Err(Error::MissingSideInfo("marginals of the previous group")),
                    },
                }
            };
            Ok(Node::new(senders, specs, rule))
        })
        .collect()
}

/// Every receiving group of a network with its rules compiled.
#[derive(Clone, Debug)]
pub struct CompiledNetwork {
    topology: NetworkTopology,
    /// `groups[k−1]` decides hop `k`; the last entry is the destination.
    groups: Vec<Vec<Node>>,
}

impl CompiledNetwork {
    /// Uses the first `K` entries of `pipeline`, which may be longer.
    pub fn new(topology: NetworkTopology, detector: DetectorKind, pipeline: &PmfPipeline) -> Result<Self> {
        let k_max = topology.hop_count();
        if pipeline.len() < k_max {
            return Err(Error::DimensionMismatch(format!(
                "pipeline covers {} groups, network has {k_max}",
                pipeline.len()
            )));
        }
        let groups = (1..=k_max + 1)
            .map(|k| compile_group(&topology, k, detector, (k >= 2).then(|| pipeline.group(k - 1))))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledNetwork { topology, groups })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    #[cfg(test)]
    pub(crate) fn groups(&self) -> &[Vec<Node>] {
        &self.groups
    }

    /// Sends `x` through every hop and returns the destination's decision.
    pub fn propagate<R: Rng + ?Sized>(&self, x: Symbol, rng: &mut R) -> Symbol {
        let mut scratch = Scratch::default();
        let mut prev = vec![x];
        let mut next = Vec::new();
        let mut y = Vec::new();
        for group in &self.groups {
            next.clear();
            for node in group {
                y.clear();
                for (&i, spec) in node.senders.iter().zip(&node.specs) {
                    y.push(sample_value(prev[i], spec, rng));
                }
                next.push(node.decide(&y, &mut scratch));
            }
            std::mem::swap(&mut prev, &mut next);
        }
        prev[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_pipeline, PmfScheme};

    fn config(topology: TopologyKind, hops: usize, n: usize, detector: DetectorKind) -> SimConfig {
        SimConfig {
            topology,
            group_sizes: vec![n; hops],
            mode: ChannelMode::KnownCsi,
            snr_db: 3.0,
            detector,
            pmf_scheme: None,
            trials: 10,
            seed: 11,
            csi_redraw: super::super::CsiRedraw::PerCampaign,
        }
    }

    #[test]
    fn shared_links_share_fading() {
        let base = StreamKey::new(5, &[]);
        let small = realize_topology(&config(TopologyKind::Mesh, 2, 3, DetectorKind::Mrc), &base).unwrap();
        let large = realize_topology(&config(TopologyKind::Mesh, 4, 3, DetectorKind::Mrc), &base).unwrap();
        for k in 1..=2 {
            assert_eq!(small.hop(k), large.hop(k));
        }
        let last = small.hop(3);
        for l in last {
            assert!(large.hop(3).contains(l));
        }
    }

    #[test]
    fn rules_follow_the_detector() {
        let cfg = config(TopologyKind::Mesh, 2, 2, DetectorKind::Id);
        let mut cfg = cfg;
        cfg.pmf_scheme = Some(PmfScheme::Id { samples: 1000, quant_bits: None });
        let base = StreamKey::new(cfg.seed, &[]);
        let topo = realize_topology(&cfg, &base).unwrap();
        let pipe = build_pipeline(&cfg, &topo, &base).unwrap();
        let net = CompiledNetwork::new(topo, cfg.detector, &pipe).unwrap();
        assert!(net.groups()[0].iter().all(|n| n.rule == Rule::Sign));
        assert!(net.groups()[1].iter().all(|n| matches!(n.rule, Rule::Id(_))));
        assert_eq!(net.groups()[2].len(), 1);
        assert_eq!(net.groups()[2][0].senders, vec![0, 1]);
    }

    #[test]
    fn first_group_sign_rejects_fan_in() {
        let cfg = config(TopologyKind::Mesh, 1, 2, DetectorKind::FirstGroupSign);
        let base = StreamKey::new(1, &[]);
        let topo = realize_topology(&cfg, &base).unwrap();
        assert!(CompiledNetwork::new(topo, cfg.detector, &PmfPipeline::empty(1)).is_err());
    }
}
