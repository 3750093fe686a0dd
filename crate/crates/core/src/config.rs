//! Experiment files.
//!
//! A TOML document with `schema_version = 1` and one `[[experiment]]` table
//! per named experiment:
//!
//! ```toml
//! schema_version = 1
//!
//! [[experiment]]
//! name = "mesh-id"
//! topology = "mesh"          # or "multihop"
//! hops = 9                   # relay groups between source and destination
//! nodes_per_group = 10       # or group_sizes = [..]
//! mode = "known_stats"       # or "known_csi"
//! snr_db = 3.0
//! detector = "id"            # first_group_sign | full_map | id | mrc
//! pmf_scheme = "id_quantized" # mcs | ps | pjp | id_analytic | id_quantized
//! quant_bits = 4
//! trials = 100000
//! seed = 7
//!
//! [experiment.sweep]
//! axis = "hops"              # hops | snr_db | quant_bits | group_size
//! values = [1, 2, 3]
//! ```
//!
//! Unknown keys are rejected, as are keys that do not apply to the chosen
//! scheme.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::DetectorKind;
use crate::engine::{apply_axis, simulate_ber, sweep, ChannelMode, CsiRedraw, PmfScheme, SimConfig, SweepAxis, SweepPoint};
use crate::topology::TopologyKind;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub config: SimConfig,
    pub sweep: Option<Sweep>,
}

impl Experiment {
    /// Configurations of every sweep point (the template alone when there
    /// is no sweep).
    pub fn point_configs(&self) -> Result<Vec<SimConfig>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| apply_axis(&self.config, s.axis, v)).collect(),
            None => Ok(vec![self.config.clone()]),
        }
    }

    /// Runs every point; without a sweep this is one `simulate_ber` call.
    pub fn run(&self) -> Result<Vec<SweepPoint>> {
        match &self.sweep {
            Some(s) => sweep(&self.config, s.axis, &s.values),
            None => Ok(vec![SweepPoint { config: self.config.clone(), estimate: simulate_ber(&self.config)? }]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SchemeKey {
    Mcs,
    Ps,
    Pjp,
    IdAnalytic,
    IdQuantized,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    #[serde(default)]
    experiment: Vec<RawExperiment>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: SweepAxis,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: String,
    topology: TopologyKind,
    hops: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes_per_group: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group_sizes: Option<Vec<usize>>,
    mode: ChannelMode,
    snr_db: f64,
    detector: DetectorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pmf_scheme: Option<SchemeKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mcs_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pilots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_f: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quant_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csi_redraw: Option<CsiRedraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
}

fn config_err(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("experiment `{name}`: {msg}"))
}

fn only_with(name: &str, key: &str, present: bool, allowed: bool, scheme: &str) -> Result<()> {
    if present && !allowed {
        return Err(config_err(name, format!("key `{key}` only applies to pmf_scheme {scheme}")));
    }
    Ok(())
}

impl RawExperiment {
    fn into_experiment(self) -> Result<Experiment> {
        let name = self.name.as_str();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::Config(format!(
                "experiment name `{name}` must be nonempty and use only letters, digits, `-`, `_` and `.`"
            )));
        }
        let group_sizes = match (self.nodes_per_group, &self.group_sizes) {
            (_, Some(sizes)) if sizes.len() != self.hops => {
                return Err(config_err(name, format!("group_sizes has {} entries for hops = {}", sizes.len(), self.hops)))
            }
            (Some(n), Some(sizes)) if sizes.iter().any(|&m| m != n) => {
                return Err(config_err(name, "nodes_per_group disagrees with group_sizes"))
            }
            (_, Some(sizes)) => sizes.clone(),
            (Some(n), None) => vec![n; self.hops],
            (None, None) if self.hops == 0 => Vec::new(),
            (None, None) => return Err(config_err(name, "missing key `nodes_per_group`")),
        };

        let scheme_key = match (self.pmf_scheme, self.detector) {
            (None, DetectorKind::Id) if self.quant_bits.is_some() => Some(SchemeKey::IdQuantized),
            (None, DetectorKind::Id) => Some(SchemeKey::IdAnalytic),
            (s, _) => s,
        };
        let is = |k: SchemeKey| scheme_key == Some(k);
        let id = is(SchemeKey::IdAnalytic) || is(SchemeKey::IdQuantized);
        only_with(name, "mcs_samples", self.mcs_samples.is_some(), is(SchemeKey::Mcs), "mcs")?;
        only_with(name, "pilots", self.pilots.is_some(), is(SchemeKey::Ps), "ps")?;
        only_with(name, "n_f", self.n_f.is_some(), is(SchemeKey::Pjp), "pjp")?;
        only_with(name, "id_samples", self.id_samples.is_some(), id, "id_analytic or id_quantized")?;
        only_with(name, "quant_bits", self.quant_bits.is_some(), is(SchemeKey::IdQuantized), "id_quantized")?;
        let pmf_scheme = match scheme_key {
            None => None,
            Some(SchemeKey::Mcs) => Some(PmfScheme::Mcs { samples: self.mcs_samples.unwrap_or(DEFAULT_SAMPLES) }),
            Some(SchemeKey::Ps) => Some(PmfScheme::Ps { pilots: self.pilots.unwrap_or(DEFAULT_SAMPLES) }),
            Some(SchemeKey::Pjp) => Some(PmfScheme::Pjp { n_f: self.n_f }),
            Some(SchemeKey::IdAnalytic) => {
                Some(PmfScheme::Id { samples: self.id_samples.unwrap_or(DEFAULT_SAMPLES), quant_bits: None })
            }
            Some(SchemeKey::IdQuantized) => {
                let bits = self.quant_bits.ok_or_else(|| config_err(name, "pmf_scheme id_quantized needs key `quant_bits`"))?;
                Some(PmfScheme::Id { samples: self.id_samples.unwrap_or(DEFAULT_SAMPLES), quant_bits: Some(bits) })
            }
        };

        let config = SimConfig {
            topology: self.topology,
            group_sizes,
            mode: self.mode,
            snr_db: self.snr_db,
            detector: self.detector,
            pmf_scheme,
            trials: self.trials.unwrap_or(DEFAULT_TRIALS),
            seed: self.seed.unwrap_or(0),
            csi_redraw: self.csi_redraw.unwrap_or_default(),
        };
        config.validate().map_err(|e| config_err(name, e))?;
        let sweep = self.sweep.map(|s| Sweep { axis: s.axis, values: s.values });
        let experiment = Experiment { name: self.name, config, sweep };
        experiment.point_configs().map_err(|e| config_err(&experiment.name, e))?;
        Ok(experiment)
    }

    fn from_experiment(e: &Experiment) -> RawExperiment {
        let c = &e.config;
        let (nodes_per_group, group_sizes) = match c.nodes_per_group() {
            Some(n) => (Some(n), None),
            None if c.group_sizes.is_empty() => (None, None),
            None => (None, Some(c.group_sizes.clone())),
        };
        let mut raw = RawExperiment {
            name: e.name.clone(),
            topology: c.topology,
            hops: c.hops(),
            nodes_per_group,
            group_sizes,
            mode: c.mode,
            snr_db: c.snr_db,
            detector: c.detector,
            pmf_scheme: None,
            mcs_samples: None,
            pilots: None,
            id_samples: None,
            n_f: None,
            quant_bits: None,
            trials: Some(c.trials),
            seed: Some(c.seed),
            csi_redraw: Some(c.csi_redraw),
            sweep: e.sweep.as_ref().map(|s| RawSweep { axis: s.axis, values: s.values.clone() }),
        };
        match c.pmf_scheme {
            None => {}
            Some(PmfScheme::Mcs { samples }) => {
                raw.pmf_scheme = Some(SchemeKey::Mcs);
                raw.mcs_samples = Some(samples);
            }
            Some(PmfScheme::Ps { pilots }) => {
                raw.pmf_scheme = Some(SchemeKey::Ps);
                raw.pilots = Some(pilots);
            }
            Some(PmfScheme::Pjp { n_f }) => {
                raw.pmf_scheme = Some(SchemeKey::Pjp);
                raw.n_f = n_f;
            }
            Some(PmfScheme::Id { samples, quant_bits }) => {
                raw.pmf_scheme = Some(if quant_bits.is_some() { SchemeKey::IdQuantized } else { SchemeKey::IdAnalytic });
                raw.id_samples = Some(samples);
                raw.quant_bits = quant_bits;
            }
        }
        raw
    }
}

/// Parses and validates an experiment document.
pub fn parse_config_str(text: &str) -> Result<Vec<Experiment>> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {}, expected {SCHEMA_VERSION}",
            raw.schema_version
        )));
    }
    if raw.experiment.is_empty() {
        return Err(Error::Config("no [[experiment]] tables".into()));
    }
    let mut names = HashSet::new();
    for e in &raw.experiment {
        if !names.insert(e.name.as_str()) {
            return Err(Error::Config(format!("duplicate experiment name `{}`", e.name)));
        }
    }
    raw.experiment.into_iter().map(RawExperiment::into_experiment).collect()
}

pub fn parse_config(path: &Path) -> Result<Vec<Experiment>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes experiments back as a document that parses to the same values.
pub fn emit_config(experiments: &[Experiment]) -> String {
    let raw = RawFile {
        schema_version: SCHEMA_VERSION,
        experiment: experiments.iter().map(RawExperiment::from_experiment).collect(),
    };
    toml::to_string(&raw).expect("experiment tables serialise")
}
