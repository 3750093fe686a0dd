//! Library results against quadrature computed independently here.

use relaysim_core::channel::{normal_cdf, normal_pdf, ChannelSpec, Symbol};
use relaysim_core::detectors::{id_statistic, map_statistic};
use relaysim_core::engine::{
    exact_ber_small, first_group_marginals, realize_topology, recursive_error_probability,
};
use relaysim_core::pmf::{estimate_mcs, product_pmf, McsGroup, McsNode};
use relaysim_core::rng::StreamKey;
use relaysim_core::{ChannelMode, DetectorKind, JointPmf, MarginalSet, PmfScheme, SimConfig, TopologyKind};

fn csi_gain(spec: &ChannelSpec) -> f64 {
    match spec.mode() {
        relaysim_core::FadingMode::KnownCsi { h } => h,
        _ => panic!("known-CSI link expected"),
    }
}

/// `P(stat(y1, y2) ≥ 0)` for independent `y_i ~ N(m_i, σ²)`, assuming the
/// statistic increases in `y2`. Midpoint rule in `y1`, bisection in `y2`.
fn acceptance_2d(mut stat: impl FnMut(f64, f64) -> f64, m: [f64; 2], sigma: f64) -> f64 {
    let steps = 4000;
    let width = 20.0 * sigma / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        let y1 = m[0] - 10.0 * sigma + (i as f64 + 0.5) * width;
        let (mut lo, mut hi) = (m[1] - 40.0 * sigma, m[1] + 40.0 * sigma);
        let inner = if stat(y1, lo) >= 0.0 {
            1.0
        } else if stat(y1, hi) < 0.0 {
            0.0
        } else {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if stat(y1, mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            1.0 - normal_cdf((0.5 * (lo + hi) - m[1]) / sigma)
        };
        total += normal_pdf((y1 - m[0]) / sigma) / sigma * width * inner;
    }
    total
}

#[test]
fn likelihoods_integrate_to_one_and_match_llr() {
    let specs = [
        ChannelSpec::known_csi(0.7, 0.5).unwrap(),
        ChannelSpec::known_stats(1.0, 0.5).unwrap(),
        ChannelSpec::known_stats(2.0, 0.25).unwrap(),
    ];
    for spec in specs {
        for x in [Symbol::Plus, Symbol::Minus] {
            let h = 1e-3;
            let total: f64 = (-60_000..60_000).map(|i| spec.likelihood((i as f64 + 0.5) * h, x) * h).sum();
            assert!((total - 1.0).abs() < 1e-6, "{spec:?} {x:?}: {total}");
        }
        for y in [-3.0, -0.4, 0.0, 0.9, 2.5] {
            let direct = (spec.likelihood(y, Symbol::Plus) / spec.likelihood(y, Symbol::Minus)).ln();
            assert!((spec.llr(y) - direct).abs() < 1e-9, "{spec:?} at {y}");
        }
    }
}

fn two_node_group(seed: u64) -> (McsGroup, JointPmf) {
    let cfg = SimConfig::new(TopologyKind::Mesh, 2, 2, ChannelMode::KnownCsi, 3.0, DetectorKind::FullMap).with_seed(seed);
    let topo = realize_topology(&cfg, &StreamKey::new(seed, &[])).unwrap();
    let prev = product_pmf(&first_group_marginals(&topo).unwrap()).unwrap();
    let nodes = (0..2)
        .map(|j| {
            let links = topo.incoming(2, j);
            McsNode { senders: links.iter().map(|l| l.from).collect(), links: links.iter().map(|l| l.spec).collect() }
        })
        .collect();
    (McsGroup { prev_n: 2, nodes }, prev)
}

#[test]
fn mcs_matches_quadrature_for_two_nodes() {
    let (group, prev) = two_node_group(41);
    let probs = prev.probs().to_vec();
    let stat = |j: usize, y: &[f64], scratch: &mut Vec<f64>| {
        let llrs: Vec<f64> = group.nodes[j].links.iter().zip(y).map(|(s, &y)| s.llr(y)).collect();
        map_statistic(&probs, &llrs, scratch)
    };

    let mut want = [0.0; 4];
    for (kappa, &p) in prev.probs().iter().enumerate() {
        let accept: Vec<f64> = (0..2)
            .map(|j| {
                let links = &group.nodes[j].links;
                let sigma = links[0].noise_variance().sqrt();
                let m = [0, 1].map(|i| if kappa >> i & 1 == 1 { csi_gain(&links[i]) } else { -csi_gain(&links[i]) });
                let mut scratch = Vec::new();
                acceptance_2d(|a, b| stat(j, &[a, b], &mut scratch), m, sigma)
            })
            .collect();
        for (idx, w) in want.iter_mut().enumerate() {
            *w += p * (0..2).map(|j| if idx >> j & 1 == 1 { accept[j] } else { 1.0 - accept[j] }).product::<f64>();
        }
    }

    let m = 1_000_000;
    let decide = |j: usize, y: &[f64], scratch: &mut Vec<f64>| Symbol::from_sign(stat(j, y, scratch));
    let got = estimate_mcs(&group, &prev, decide, Symbol::Plus, m, &StreamKey::new(9, &[])).unwrap();
    for (g, w) in got.probs().iter().zip(want) {
        let se = (w * (1.0 - w) / m as f64).sqrt();
        assert!((g - w).abs() <= 4.0 * se + 1e-6, "{:?} vs {want:?}", got.probs());
    }
}

#[test]
fn recursion_matches_quadrature() {
    let links = [ChannelSpec::known_csi(0.8, 0.5).unwrap(), ChannelSpec::known_csi(1.3, 0.5).unwrap()];
    let truth = MarginalSet::new(vec![0.85, 0.7]).unwrap();
    let used = MarginalSet::new(vec![0.9, 0.75]).unwrap();
    let sigma = 0.5f64.sqrt();
    let mut want = 0.0;
    for kappa in 0..4usize {
        let p: f64 = (0..2)
            .map(|i| if kappa >> i & 1 == 1 { truth.p_correct()[i] } else { 1.0 - truth.p_correct()[i] })
            .product();
        let m = [0, 1].map(|i| if kappa >> i & 1 == 1 { csi_gain(&links[i]) } else { -csi_gain(&links[i]) });
        let stat = |a: f64, b: f64| id_statistic(used.p_correct(), &[links[0].llr(a), links[1].llr(b)]);
        want += p * (1.0 - acceptance_2d(stat, m, sigma));
    }
    let samples = 1_000_000;
    let got = recursive_error_probability(&links, &truth, &used, samples, &StreamKey::new(2, &[])).unwrap();
    let se = (want * (1.0 - want) / samples as f64).sqrt();
    assert!((got - want).abs() <= 4.0 * se, "{got} vs {want}");
}

#[test]
fn one_group_id_equals_full_map_exactly() {
    // first-group decisions are independent, so their pmf is the product
    for seed in [1, 2, 3] {
        let base = SimConfig::new(TopologyKind::Mesh, 1, 2, ChannelMode::KnownCsi, 3.0, DetectorKind::Id).with_seed(seed);
        let id = base.clone().with_scheme(PmfScheme::Id { samples: 10, quant_bits: None });
        let mut map = base.with_scheme(PmfScheme::Mcs { samples: 10 });
        map.detector = DetectorKind::FullMap;
        let (a, b) = (exact_ber_small(&id).unwrap(), exact_ber_small(&map).unwrap());
        assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
    }
}
