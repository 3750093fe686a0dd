//! CSV result tables and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::SweepPoint;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "experiment,topology,detector,pmf_scheme,mode,snr_db,hops,nodes_per_group,quant_bits,trials,errors,ber,ci95";

/// `printf("%g")`: six significant digits, trailing zeros removed,
/// exponent form below 1e−4 and from 1e6 on.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One data row for a sweep point.
pub fn csv_row(experiment: &str, point: &SweepPoint) -> String {
    let c = &point.config;
    let e = &point.estimate;
    let nodes = match c.nodes_per_group() {
        Some(n) => n.to_string(),
        None if c.group_sizes.is_empty() => "1".into(),
        None => c.group_sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
    };
    let mut row = String::new();
    write!(
        row,
        "{experiment},{},{},{},{},{},{},{nodes},{},{},{},{},{}",
        c.topology.as_str(),
        c.detector.as_str(),
        c.pmf_scheme.map_or("none", |s| s.label()),
        c.mode.as_str(),
        format_g(c.snr_db),
        c.hops(),
        c.pmf_scheme.and_then(|s| s.quant_bits()).map_or(String::new(), |b| b.to_string()),
        e.trials,
        e.errors,
        format_g(e.ber),
        format_g(e.ci95_halfwidth),
    )
    .expect("writing to a String");
    row
}

pub fn csv_table(experiment: &str, points: &[SweepPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&csv_row(experiment, p));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Write { path: path.to_path_buf(), source })
}

/// Writes `<dir>/<experiment>.csv`, creating `dir` if needed.
pub fn write_csv(dir: &Path, experiment: &str, points: &[SweepPoint]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
    let path = dir.join(format!("{experiment}.csv"));
    write_file(&path, &csv_table(experiment, points))?;
    Ok(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub experiment: String,
    pub seed: u64,
    pub points: usize,
    pub csv: String,
}

/// Provenance of one `simulate` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed_override: Option<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Seconds since the Unix epoch at the end of the run.
    pub finished_at_unix: u64,
    pub experiments: Vec<ManifestEntry>,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Write { path: dir.to_path_buf(), source })?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    write_file(&path, &(text + "\n"))?;
    Ok(path)
}
