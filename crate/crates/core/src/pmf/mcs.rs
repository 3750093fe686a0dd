//! Monte Carlo estimation of a group's joint decision pmf.
//!
//! One draw picks a previous-group decision vector from its pmf, lets every
//! node of the group hear it through its own links and records the joint
//! decision pattern. The previous vector is shared by all nodes of the draw,
//! which is where the correlation between their decisions comes from.

use rayon::prelude::*;

use super::JointPmf;
use crate::channel::{sample_value, ChannelSpec, Symbol};
use crate::rng::StreamKey;
use crate::{Error, Result};

const CHUNK: u64 = 4096;

/// Incoming links of one node: `senders[i]` transmits over `links[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct McsNode {
    pub senders: Vec<usize>,
    pub links: Vec<ChannelSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McsGroup {
    /// Size of the previous group.
    pub prev_n: usize,
    pub nodes: Vec<McsNode>,
}

impl McsGroup {
    fn validate(&self, prev: &JointPmf) -> Result<()> {
        if prev.n() != self.prev_n {
            return Err(Error::DimensionMismatch(format!(
                "previous pmf over {} nodes, group expects {}",
                prev.n(),
                self.prev_n
            )));
        }
        if self.nodes.is_empty() {
            return Err(Error::InvalidTopology("group has no nodes".into()));
        }
        for node in &self.nodes {
            if node.senders.len() != node.links.len() || node.senders.is_empty() {
                return Err(Error::DimensionMismatch("node senders and links differ".into()));
            }
            if node.senders.iter().any(|&s| s >= self.prev_n) {
                return Err(Error::DimensionMismatch("sender outside the previous group".into()));
            }
        }
        Ok(())
    }
}

/// Estimates `P(x^(k) | x = truth)` from `samples` draws.
///
/// `prev` is the previous group's pmf conditioned on `x = +1`; for
/// `truth = −1` its mirror is sampled. `decide(node, y, scratch)` returns
/// the decision of `node` for its received samples; `scratch` is reused
/// within a worker. Draw `s` uses stream `s` of `key`, so the estimate does
/// not depend on the thread count.
pub fn estimate_mcs<D, S>(
    group: &McsGroup,
    prev: &JointPmf,
    decide: D,
    truth: Symbol,
    samples: u64,
    key: &StreamKey,
) -> Result<JointPmf>
where
    D: Fn(usize, &[f64], &mut S) -> Symbol + Sync,
    S: Default,
{
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    group.validate(prev)?;
    let n = group.nodes.len();
    let sampler = prev.sampler();
    let flip = if truth == Symbol::Plus { 0 } else { (1usize << prev.n()) - 1 };
    let chunks = samples.div_ceil(CHUNK);

    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut hist = vec![0u64; 1 << n];
            let mut y = Vec::new();
            let mut scratch = S::default();
            for s in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut rng = key.stream(s);
                let u: f64 = rand::Rng::random(&mut rng);
                let kappa = sampler.sample(u) ^ flip;
                let mut out = 0usize;
                for (j, node) in group.nodes.iter().enumerate() {
                    y.clear();
                    for (&i, spec) in node.senders.iter().zip(&node.links) {
                        let x = Symbol::from_bit(kappa >> i & 1 == 1);
                        y.push(sample_value(x, spec, &mut rng));
                    }
                    out |= decide(j, &y, &mut scratch).bit() << j;
                }
                hist[out] += 1;
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
    JointPmf::from_counts(n, &counts)
}
