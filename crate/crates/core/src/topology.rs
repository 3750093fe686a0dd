//! Mesh and multi-branch multi-hop layouts.
//!
//! Groups are numbered from the source (group 0, one node) through the
//! relay groups `1..=K` to the destination (group `K+1`, one node). Hop `k`
//! carries the links from group `k−1` to group `k`, so a network with `K`
//! relay groups has `K+1` hops.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Mesh,
    Multihop,
}

impl TopologyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Mesh => "mesh",
            TopologyKind::Multihop => "multihop",
        }
    }
}

/// A directed link from node `from` of group `k−1` to node `to` of group `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub spec: ChannelSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    kind: TopologyKind,
    group_sizes: Vec<usize>,
    /// `hops[k−1]` holds the links of hop `k`, sorted by `(to, from)`.
    hops: Vec<Vec<Link>>,
}

impl NetworkTopology {
    /// Fully connected consecutive groups.
    ///
    /// `channel_factory(hop, from, to)` supplies the spec of every link.
    pub fn build_mesh<F>(hop_count: usize, sizes: &[usize], mut channel_factory: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Result<ChannelSpec>,
    {
        if sizes.is_empty() || hop_count == 0 {
            return Err(Error::InvalidTopology("a mesh needs at least one relay group".into()));
        }
        if sizes.len() != hop_count {
            return Err(Error::InvalidTopology(format!(
                "{} group sizes given for {hop_count} relay groups",
                sizes.len()
            )));
        }
        if let Some(g) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidTopology(format!("relay group {} is empty", g + 1)));
        }
        let mut all = Vec::with_capacity(hop_count + 2);
        all.push(1);
        all.extend_from_slice(sizes);
        all.push(1);
        let mut hops = Vec::with_capacity(hop_count + 1);
        for k in 1..all.len() {
            let mut links = Vec::with_capacity(all[k - 1] * all[k]);
            for to in 0..all[k] {
                for from in 0..all[k - 1] {
                    links.push(Link { from, to, spec: channel_factory(k, from, to)? });
                }
            }
            hops.push(links);
        }
        Ok(NetworkTopology { kind: TopologyKind::Mesh, group_sizes: sizes.to_vec(), hops })
    }

    /// Parallel chains: node `i` of group `k` hears only node `i` of group
    /// `k−1`. The source feeds every branch and the destination hears all of
    /// them.
    pub fn build_multihop<F>(hop_count: usize, branches: usize, mut channel_factory: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Result<ChannelSpec>,
    {
        if branches == 0 {
            return Err(Error::InvalidTopology("a multihop network needs at least one branch".into()));
        }
        if hop_count == 0 {
            return Err(Error::InvalidTopology("a multihop network needs at least one relay group".into()));
        }
        let mut hops = Vec::with_capacity(hop_count + 1);
        hops.push(
            (0..branches)
                .map(|to| Ok(Link { from: 0, to, spec: channel_factory(1, 0, to)? }))
                .collect::<Result<Vec<_>>>()?,
        );
        for k in 2..=hop_count {
            hops.push(
                (0..branches)
                    .map(|i| Ok(Link { from: i, to: i, spec: channel_factory(k, i, i)? }))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        hops.push(
            (0..branches)
                .map(|from| Ok(Link { from, to: 0, spec: channel_factory(hop_count + 1, from, 0)? }))
                .collect::<Result<Vec<_>>>()?,
        );
        Ok(NetworkTopology {
            kind: TopologyKind::Multihop,
            group_sizes: vec![branches; hop_count],
            hops,
        })
    }

    /// Source talking straight to the destination (no relay groups).
    pub fn direct_link(spec: ChannelSpec) -> Self {
        NetworkTopology {
            kind: TopologyKind::Mesh,
            group_sizes: Vec::new(),
            hops: vec![vec![Link { from: 0, to: 0, spec }]],
        }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    /// Number of relay groups `K`.
    pub fn hop_count(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Size of group `g`, counting the source (`g = 0`) and destination
    /// (`g = K+1`) as single nodes.
    pub fn group_size(&self, g: usize) -> usize {
        if g == 0 || g == self.group_sizes.len() + 1 {
            1
        } else {
            self.group_sizes[g - 1]
        }
    }

    /// Links of hop `k` (from group `k−1` to group `k`), `1 ≤ k ≤ K+1`.
    pub fn hop(&self, k: usize) -> &[Link] {
        &self.hops[k - 1]
    }

    pub fn hops(&self) -> &[Vec<Link>] {
        &self.hops
    }

    /// Links arriving at node `j` of group `k`, ordered by sender.
    pub fn incoming(&self, k: usize, j: usize) -> Vec<Link> {
        let mut v: Vec<Link> = self.hop(k).iter().filter(|l| l.to == j).copied().collect();
        v.sort_by_key(|l| l.from);
        v
    }

    pub fn link_counts(&self) -> Vec<usize> {
        self.hops.iter().map(Vec::len).collect()
    }

    pub fn total_links(&self) -> usize {
        self.hops.iter().map(Vec::len).sum()
    }

    /// Every `(hop, from, to)` triple of this network.
    pub fn link_set(&self) -> Vec<(usize, usize, usize)> {
        let mut v: Vec<_> = self
            .hops
            .iter()
            .enumerate()
            .flat_map(|(i, links)| links.iter().map(move |l| (i + 1, l.from, l.to)))
            .collect();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(_: usize, _: usize, _: usize) -> Result<ChannelSpec> {
        ChannelSpec::known_stats(1.0, 1.0)
    }

    #[test]
    fn mesh_link_counts() {
        assert_eq!(NetworkTopology::build_mesh(1, &[2], unit).unwrap().link_counts(), vec![2, 2]);
        assert_eq!(NetworkTopology::build_mesh(2, &[3, 3], unit).unwrap().link_counts(), vec![3, 9, 3]);
        let big = NetworkTopology::build_mesh(9, &[10; 9], unit).unwrap();
        assert_eq!(big.total_links(), 820);
    }

    #[test]
    fn mesh_rejects_bad_sizes() {
        assert!(NetworkTopology::build_mesh(0, &[], unit).is_err());
        assert!(NetworkTopology::build_mesh(2, &[3, 0], unit).is_err());
        assert!(NetworkTopology::build_mesh(2, &[3], unit).is_err());
    }

    #[test]
    fn mesh_in_degree() {
        let t = NetworkTopology::build_mesh(3, &[2, 4, 3], unit).unwrap();
        for k in 1..=4 {
            for j in 0..t.group_size(k) {
                assert_eq!(t.incoming(k, j).len(), t.group_size(k - 1));
            }
        }
    }

    #[test]
    fn multihop_structure() {
        let one = NetworkTopology::build_multihop(1, 2, unit).unwrap();
        let mesh = NetworkTopology::build_mesh(1, &[2], unit).unwrap();
        assert_eq!(one.link_set(), mesh.link_set());

        let t = NetworkTopology::build_multihop(3, 10, unit).unwrap();
        for k in 2..=3 {
            assert_eq!(t.hop(k).len(), 10);
            for j in 0..10 {
                let inc = t.incoming(k, j);
                assert_eq!(inc.len(), 1);
                assert_eq!(inc[0].from, j);
            }
        }
        assert_eq!(t.incoming(4, 0).len(), 10);

        let chain = NetworkTopology::build_multihop(2, 1, unit).unwrap();
        assert_eq!(chain.link_counts(), vec![1, 1, 1]);
        assert!(NetworkTopology::build_multihop(2, 0, unit).is_err());
    }

    #[test]
    fn multihop_links_are_subset_of_mesh() {
        let mesh = NetworkTopology::build_mesh(4, &[5; 4], unit).unwrap();
        let mh = NetworkTopology::build_multihop(4, 5, unit).unwrap();
        let all = mesh.link_set();
        assert!(mh.link_set().iter().all(|l| all.binary_search(l).is_ok()));
    }

    #[test]
    fn every_node_connected() {
        for t in [
            NetworkTopology::build_mesh(3, &[2, 3, 2], unit).unwrap(),
            NetworkTopology::build_multihop(3, 4, unit).unwrap(),
        ] {
            let k_max = t.hop_count() + 1;
            for k in 1..=k_max {
                for j in 0..t.group_size(k) {
                    assert!(!t.incoming(k, j).is_empty());
                }
                for i in 0..t.group_size(k - 1) {
                    assert!(t.hop(k).iter().any(|l| l.from == i));
                }
            }
        }
    }
}
