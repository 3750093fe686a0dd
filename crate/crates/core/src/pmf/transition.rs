//! Sign-flip transition matrix `P(κ | ζ) = Π_i p_{c,i}^{δ_i} p_{e,i}^{1−δ_i}`.
//!
//! The matrix is the Kronecker product of one 2×2 block per node and is
//! never materialised: both the forward map and the inverse are applied one
//! bit axis at a time in `O(n·2^n)`.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    per_node_pc: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(per_node_pc: Vec<f64>) -> Result<Self> {
        if per_node_pc.is_empty() {
            return Err(Error::InvalidPmf("transition matrix needs at least one node".into()));
        }
        if let Some(bad) = per_node_pc.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidPmf(format!("p_c = {bad} outside [0, 1]")));
        }
        Ok(TransitionMatrix { per_node_pc })
    }

    pub fn n(&self) -> usize {
        self.per_node_pc.len()
    }

    pub fn per_node_pc(&self) -> &[f64] {
        &self.per_node_pc
    }

    pub fn is_invertible(&self) -> bool {
        self.per_node_pc.iter().all(|&p| p != 0.5)
    }

    /// `P · p_ζ`.
    pub fn apply(&self, p_zeta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(p_zeta)?;
        let mut v = p_zeta.to_vec();
        for (i, &pc) in self.per_node_pc.iter().enumerate() {
            mix_axis(&mut v, i, pc, 1.0 - pc);
        }
        Ok(v)
    }

    /// `P⁻¹ · p̂_κ`. Entries sum to the input's sum but may be negative.
    pub fn solve(&self, p_kappa: &[f64]) -> Result<Vec<f64>> {
        self.check_len(p_kappa)?;
        if let Some(node) = self.per_node_pc.iter().position(|&p| p == 0.5) {
            return Err(Error::UninformativeNode { node });
        }
        let mut v = p_kappa.to_vec();
        for (i, &pc) in self.per_node_pc.iter().enumerate() {
            let pe = 1.0 - pc;
            let det = pc - pe;
            mix_axis(&mut v, i, pc / det, -pe / det);
        }
        Ok(v)
    }

    /// Dense `2^n × 2^n` matrix; row `κ`, column `ζ`. For small `n` only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let len = 1usize << self.n();
        (0..len)
            .map(|kappa| {
                (0..len)
                    .map(|zeta| {
                        self.per_node_pc
                            .iter()
                            .enumerate()
                            .map(|(i, &pc)| if (kappa ^ zeta) >> i & 1 == 0 { pc } else { 1.0 - pc })
                            .product()
                    })
                    .collect()
            })
            .collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != 1 << self.n() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} nodes",
                v.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// Applies `[[same, cross], [cross, same]]` along bit axis `axis`.
fn mix_axis(v: &mut [f64], axis: usize, same: f64, cross: f64) {
    let bit = 1 << axis;
    for k in 0..v.len() {
        if k & bit == 0 {
            let a = v[k];
            let b = v[k | bit];
            v[k] = same * a + cross * b;
            v[k | bit] = cross * a + same * b;
        }
    }
}

/// `b = P⁻¹ p̂_κ` for the given per-node probabilities of correct sign.
pub fn transition_solve(p_kappa_hat: &[f64], per_node_pc: &[f64]) -> Result<Vec<f64>> {
    TransitionMatrix::new(per_node_pc.to_vec())?.solve(p_kappa_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_node_solve() {
        let b = transition_solve(&[0.14, 0.86], &[0.9]).unwrap();
        assert!((b[0] - 0.05).abs() < 1e-14 && (b[1] - 0.95).abs() < 1e-14);
    }

    #[test]
    fn round_trip_three_nodes() {
        let t = TransitionMatrix::new(vec![0.9, 0.8, 0.7]).unwrap();
        let p = [0.01, 0.02, 0.03, 0.04, 0.1, 0.2, 0.25, 0.35];
        let b = t.solve(&t.apply(&p).unwrap()).unwrap();
        assert!(b.iter().zip(p).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn singular_block_is_reported() {
        let err = transition_solve(&[0.25; 4], &[0.9, 0.5]).unwrap_err();
        assert!(matches!(err, Error::UninformativeNode { node: 1 }));
    }

    #[test]
    fn dense_matrix_is_doubly_stochastic_and_matches_apply() {
        let t = TransitionMatrix::new(vec![0.9, 0.65, 0.8]).unwrap();
        let d = t.to_dense();
        for i in 0..8 {
            let row: f64 = d[i].iter().sum();
            let col: f64 = d.iter().map(|r| r[i]).sum();
            assert!((row - 1.0).abs() < 1e-14 && (col - 1.0).abs() < 1e-14);
        }
        let p: Vec<f64> = (1..=8).map(|x| x as f64 / 36.0).collect();
        let fast = t.apply(&p).unwrap();
        for (k, row) in d.iter().enumerate() {
            let slow: f64 = row.iter().zip(&p).map(|(a, b)| a * b).sum();
            assert!((slow - fast[k]).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn solve_inverts_apply(
            pcs in prop::collection::vec(0.55f64..0.99, 1..=6),
            seed in prop::collection::vec(0.0f64..1.0, 64),
        ) {
            let n = pcs.len();
            let raw = &seed[..1 << n];
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let p: Vec<f64> = raw.iter().map(|x| (x + 1e-9 / raw.len() as f64) / s).collect();
            let t = TransitionMatrix::new(pcs).unwrap();
            let b = t.solve(&t.apply(&p).unwrap()).unwrap();
            for (x, y) in b.iter().zip(&p) {
                prop_assert!((x - y).abs() < 1e-10);
            }
            let sum: f64 = b.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
