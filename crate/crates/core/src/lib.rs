//! Decode-and-forward relay networks: per-link channel math, mesh and
//! multi-branch multi-hop topologies, joint decision pmfs and their
//! estimators, MAP and suboptimal detectors, and a reproducible Monte Carlo
//! BER engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: fading/noise sampling, likelihoods, per-link LLRs and
//!   first-hop error probabilities.
//! * [`topology`]: mesh and multihop layouts with per-link channel grids.
//! * [`pmf`]: joint decision pmfs, the Kronecker-factored transition
//!   matrix, simplex projection and the MCS/PS/PJP acquisition schemes.
//! * [`detectors`]: decision rules used by relays and the destination.
//! * [`engine`]: pmf pipelines, trials, campaigns, sweeps and exact
//!   small-instance oracles.
//! * [`config`] and [`output`]: experiment files and CSV/manifest emission.

pub mod channel;
pub mod config;
pub mod detectors;
pub mod engine;
mod error;
pub mod output;
pub mod pmf;
pub mod quad;
pub mod rng;
pub mod topology;

pub use channel::{ChannelSpec, FadingMode, Observation, StatsLikelihoodParams, Symbol};
pub use engine::{BerEstimate, ChannelMode, CsiRedraw, DetectorKind, PmfScheme, SimConfig};
pub use error::{Error, Result};
pub use pmf::{JointPmf, MarginalSet, ProjectionResult, TransitionMatrix};
pub use topology::{NetworkTopology, TopologyKind};
