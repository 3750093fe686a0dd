//! Monte Carlo campaigns over relay networks.
//!
//! A campaign realises the links, builds the per-group side information
//! once, compiles every node's decision rule and then runs independent
//! trials. Trial `t` of sweep point `p` draws from its own stream keyed by
//! `(seed, p)`, and errors are reduced as integers, so the result does not
//! depend on the number of worker threads.

mod exact;
mod network;
mod pipeline;

pub use exact::exact_ber_small;
pub use network::{realize_topology, CompiledNetwork};
pub use pipeline::{build_pipeline, first_group_marginals, recursive_error_probability, GroupKnowledge, PmfPipeline};

pub use crate::detectors::DetectorKind;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Symbol;
use crate::pmf::DEFAULT_MAX_NODES;
use crate::rng::{site, StreamKey};
use crate::topology::TopologyKind;
use crate::{Error, Result};

const TRIAL_CHUNK: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Receivers know each fading value `h`.
    KnownCsi,
    /// Receivers know only the Rayleigh distribution of `h`.
    KnownStats,
}

impl ChannelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelMode::KnownCsi => "known_csi",
            ChannelMode::KnownStats => "known_stats",
        }
    }
}

/// How often known-CSI fading values are redrawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiRedraw {
    /// Fresh fading (and side information) for every trial.
    PerTrial,
    /// One fading grid for the whole campaign.
    #[default]
    PerCampaign,
}

/// How a detector's side information about the previous group is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum PmfScheme {
    /// Monte Carlo sampling of each group's joint pmf.
    Mcs { samples: u64 },
    /// Pilot signals, inverted through the sign-flip transition matrix.
    Ps { pilots: u64 },
    /// Predefined pmf, uniform over outcomes with at least `n_f` correct
    /// decisions (`None`: strict majority of the group).
    Pjp { n_f: Option<usize> },
    /// Per-node marginals from the independent-decisions recursion,
    /// optionally quantised before being passed on.
    Id { samples: u64, quant_bits: Option<u32> },
}

impl PmfScheme {
    pub fn label(&self) -> &'static str {
        match self {
            PmfScheme::Mcs { .. } => "mcs",
            PmfScheme::Ps { .. } => "ps",
            PmfScheme::Pjp { .. } => "pjp",
            PmfScheme::Id { quant_bits: None, .. } => "id_analytic",
            PmfScheme::Id { quant_bits: Some(_), .. } => "id_quantized",
        }
    }

    pub fn quant_bits(&self) -> Option<u32> {
        match self {
            PmfScheme::Id { quant_bits, .. } => *quant_bits,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: TopologyKind,
    /// Sizes of relay groups `1..=K`; empty for a direct link.
    pub group_sizes: Vec<usize>,
    pub mode: ChannelMode,
    pub snr_db: f64,
    pub detector: DetectorKind,
    pub pmf_scheme: Option<PmfScheme>,
    pub trials: u64,
    pub seed: u64,
    pub csi_redraw: CsiRedraw,
}

impl SimConfig {
    /// `hops` relay groups of `nodes` each, with one million trials and seed 0.
    pub fn new(topology: TopologyKind, hops: usize, nodes: usize, mode: ChannelMode, snr_db: f64, detector: DetectorKind) -> Self {
        SimConfig {
            topology,
            group_sizes: vec![nodes; hops],
            mode,
            snr_db,
            detector,
            pmf_scheme: None,
            trials: 1_000_000,
            seed: 0,
            csi_redraw: CsiRedraw::default(),
        }
    }

    pub fn with_scheme(mut self, scheme: PmfScheme) -> Self {
        self.pmf_scheme = Some(scheme);
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_csi_redraw(mut self, redraw: CsiRedraw) -> Self {
        self.csi_redraw = redraw;
        self
    }

    /// Number of relay groups `K`.
    pub fn hops(&self) -> usize {
        self.group_sizes.len()
    }

    /// Common group size, if all groups have the same size.
    pub fn nodes_per_group(&self) -> Option<usize> {
        match self.group_sizes.first() {
            Some(&n) if self.group_sizes.iter().all(|&m| m == n) => Some(n),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.snr_db.is_finite() {
            return bad(format!("snr_db must be finite, got {}", self.snr_db));
        }
        if self.group_sizes.contains(&0) {
            return bad("group sizes must be positive".into());
        }
        if self.topology == TopologyKind::Multihop && self.nodes_per_group().is_none() && self.hops() > 0 {
            return bad("a multihop network has the same number of branches in every group".into());
        }
        let max_n = self.group_sizes.iter().copied().max().unwrap_or(1);
        let fan_in = match self.topology {
            TopologyKind::Mesh => max_n,
            TopologyKind::Multihop => 1,
        };
        let destination_fan_in = self.group_sizes.last().copied().unwrap_or(1);
        match (self.detector, self.pmf_scheme) {
            (DetectorKind::FirstGroupSign, None) => {
                if self.hops() > 0 && (fan_in > 1 || destination_fan_in > 1) {
                    return bad("detector first_group_sign needs one incoming link per node".into());
                }
            }
            (DetectorKind::Mrc, None) => {}
            (DetectorKind::FullMap, Some(PmfScheme::Mcs { .. } | PmfScheme::Ps { .. } | PmfScheme::Pjp { .. })) => {
                if max_n > DEFAULT_MAX_NODES {
                    return bad(format!("full_map supports groups of at most {DEFAULT_MAX_NODES} nodes"));
                }
            }
            (DetectorKind::Id, Some(PmfScheme::Id { .. })) => {}
            (DetectorKind::FullMap, None) => return bad("detector full_map needs key `pmf_scheme`".into()),
            (DetectorKind::Id, None) => return bad("detector id needs key `pmf_scheme`".into()),
            (d, Some(s)) => {
                return bad(format!("pmf_scheme {} cannot be used with detector {}", s.label(), d.as_str()))
            }
        }
        match self.pmf_scheme {
            Some(PmfScheme::Mcs { samples: 0 } | PmfScheme::Id { samples: 0, .. }) => {
                return bad("sample budget must be at least 1".into())
            }
            Some(PmfScheme::Ps { pilots: 0 }) => return bad("pilots must be at least 1".into()),
            Some(PmfScheme::Pjp { n_f: Some(n_f) }) => {
                let min_n = self.group_sizes.iter().copied().min().unwrap_or(1);
                if n_f > min_n {
                    return bad(format!("n_f = {n_f} exceeds the smallest group size {min_n}"));
                }
            }
            Some(PmfScheme::Id { quant_bits: Some(b), .. }) if !(1..=52).contains(&b) => {
                return bad(format!("quant_bits must be in 1..=52, got {b}"))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub errors: u64,
    pub trials: u64,
    pub ber: f64,
    /// Normal-approximation 95% half-width `1.96·√(ber(1−ber)/trials)`.
    pub ci95_halfwidth: f64,
}

impl BerEstimate {
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let ber = errors as f64 / trials as f64;
        BerEstimate { errors, trials, ber, ci95_halfwidth: 1.96 * (ber * (1.0 - ber) / trials as f64).sqrt() }
    }

    /// Binomial standard error.
    pub fn std_error(&self) -> f64 {
        self.ci95_halfwidth / 1.96
    }
}

/// Outcome of one transmission through the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub truth: Symbol,
    pub decision: Symbol,
}

impl TrialOutcome {
    pub fn is_error(&self) -> bool {
        self.truth != self.decision
    }
}

/// Draws `x` uniformly and sends it through `network`.
pub fn run_trial<R: Rng + ?Sized>(network: &CompiledNetwork, rng: &mut R) -> TrialOutcome {
    let truth = if rng.random::<bool>() { Symbol::Plus } else { Symbol::Minus };
    TrialOutcome { truth, decision: network.propagate(truth, rng) }
}

/// A configuration with its links and side information in place.
#[derive(Clone, Debug)]
pub struct Campaign {
    config: SimConfig,
    /// `None` when everything is rebuilt per trial.
    fixed: Option<(CompiledNetwork, PmfPipeline)>,
}

impl Campaign {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let fixed = if per_trial(config) {
            None
        } else {
            let base = StreamKey::new(config.seed, &[]);
            let topo = realize_topology(config, &base)?;
            let pipeline = build_pipeline(config, &topo, &base)?;
            Some((CompiledNetwork::new(topo, config.detector, &pipeline)?, pipeline))
        };
        Ok(Campaign { config: config.clone(), fixed })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn pipeline(&self) -> Option<&PmfPipeline> {
        self.fixed.as_ref().map(|(_, p)| p)
    }

    pub fn network(&self) -> Option<&CompiledNetwork> {
        self.fixed.as_ref().map(|(n, _)| n)
    }

    /// Runs the campaign's trials as sweep point `point`.
    pub fn run(&self, point: u64) -> Result<BerEstimate> {
        let config = &self.config;
        let key = StreamKey::new(config.seed, &[site::TRIAL, point]);
        let trials = config.trials;
        let errors = (0..trials.div_ceil(TRIAL_CHUNK))
            .into_par_iter()
            .map(|c| -> Result<u64> {
                let mut errors = 0;
                for t in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                    let mut rng = key.stream(t);
                    let outcome = match &self.fixed {
                        Some((net, _)) => run_trial(net, &mut rng),
                        None => {
                            let base = StreamKey::new(config.seed, &[site::TRIAL_PIPELINE, point, t]);
                            let topo = realize_topology(config, &base)?;
                            let pipeline = build_pipeline(config, &topo, &base)?;
                            run_trial(&CompiledNetwork::new(topo, config.detector, &pipeline)?, &mut rng)
                        }
                    };
                    errors += outcome.is_error() as u64;
                }
                Ok(errors)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        Ok(BerEstimate::from_counts(errors, trials))
    }
}

fn per_trial(config: &SimConfig) -> bool {
    config.mode == ChannelMode::KnownCsi && config.csi_redraw == CsiRedraw::PerTrial
}

/// BER of one configuration.
pub fn simulate_ber(config: &SimConfig) -> Result<BerEstimate> {
    Campaign::new(config)?.run(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Hops,
    SnrDb,
    QuantBits,
    GroupSize,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Hops => "hops",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::QuantBits => "quant_bits",
            SweepAxis::GroupSize => "group_size",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub config: SimConfig,
    pub estimate: BerEstimate,
}

fn whole(value: f64, axis: SweepAxis) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!("{} value {value} is not a nonnegative integer", axis.as_str())))
    }
}

/// `template` with the swept parameter set to `value`.
///
/// On the `quant_bits` axis, `0` means unquantised.
pub fn apply_axis(template: &SimConfig, axis: SweepAxis, value: f64) -> Result<SimConfig> {
    let mut c = template.clone();
    match axis {
        SweepAxis::SnrDb => c.snr_db = value,
        SweepAxis::Hops => {
            let n = template.nodes_per_group().unwrap_or(1);
            c.group_sizes = vec![n; whole(value, axis)?];
        }
        SweepAxis::GroupSize => {
            let n = whole(value, axis)?;
            c.group_sizes = vec![n; template.hops()];
        }
        SweepAxis::QuantBits => {
            let bits = whole(value, axis)? as u32;
            match &mut c.pmf_scheme {
                Some(PmfScheme::Id { quant_bits, .. }) => *quant_bits = (bits > 0).then_some(bits),
                _ => return Err(Error::Config("the quant_bits axis needs pmf_scheme id".into())),
            }
        }
    }
    c.validate()?;
    Ok(c)
}

/// One estimate per value. Point `i` uses trial streams keyed by `i`.
///
/// A hop sweep builds the side information once for the deepest network
/// and reuses its prefix; group `k`'s pmf does not depend on the groups
/// behind it, so this equals running each point on its own.
pub fn sweep(template: &SimConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let configs = values.iter().map(|&v| apply_axis(template, axis, v)).collect::<Result<Vec<_>>>()?;
    let reuse = axis == SweepAxis::Hops && !per_trial(template) && configs.len() > 1;
    let shared = if reuse {
        let deepest = configs.iter().max_by_key(|c| c.hops()).expect("nonempty");
        let base = StreamKey::new(deepest.seed, &[]);
        let topo = realize_topology(deepest, &base)?;
        Some(build_pipeline(deepest, &topo, &base)?)
    } else {
        None
    };
    configs
        .into_iter()
        .enumerate()
        .map(|(i, config)| {
            let campaign = match &shared {
                Some(pipeline) => {
                    let base = StreamKey::new(config.seed, &[]);
                    let topo = realize_topology(&config, &base)?;
                    let net = CompiledNetwork::new(topo, config.detector, pipeline)?;
                    let own = PmfPipeline::truncated(pipeline, config.hops());
                    Campaign { config: config.clone(), fixed: Some((net, own)) }
                }
                None => Campaign::new(&config)?,
            };
            let estimate = campaign.run(i as u64)?;
            Ok(SweepPoint { config, estimate })
        })
        .collect()
}
