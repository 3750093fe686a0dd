//! Least-norm correction of a unit-sum vector onto the probability simplex.
//!
//! Minimises `‖b − p‖²` subject to `p ≥ 0`, `Σp = 1`. The KKT conditions
//! give `p_i = (b_i − ξ)⁺` with a single waterline `ξ`, found exactly by
//! sorting.

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    /// The corrected probability vector.
    pub p_hat: Vec<f64>,
    /// Waterline `ξ`.
    pub xi: f64,
    /// `‖b − p̂‖₂`.
    pub correction_norm: f64,
}

pub fn project_simplex(b: &[f64]) -> Result<ProjectionResult> {
    if b.is_empty() {
        return Err(Error::DimensionMismatch("cannot project an empty vector".into()));
    }
    let sum: f64 = b.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::NotNormalized { sum });
    }
    if b.iter().all(|&v| v >= 0.0) {
        return Ok(ProjectionResult { p_hat: b.to_vec(), xi: 0.0, correction_norm: 0.0 });
    }

    let mut sorted = b.to_vec();
    sorted.sort_unstable_by(|x, y| y.total_cmp(x));
    let mut prefix = 0.0;
    let mut xi = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            xi = candidate;
        } else {
            break;
        }
    }
    let p_hat: Vec<f64> = b.iter().map(|&v| (v - xi).max(0.0)).collect();
    let correction_norm = b.iter().zip(&p_hat).map(|(x, p)| (x - p).powi(2)).sum::<f64>().sqrt();
    Ok(ProjectionResult { p_hat, xi, correction_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let r = project_simplex(&[0.6, 0.5, -0.1]).unwrap();
        assert!((r.xi - 0.05).abs() < 1e-15);
        for (got, want) in r.p_hat.iter().zip([0.55, 0.45, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }

        let r = project_simplex(&[1.2, -0.2]).unwrap();
        assert!((r.xi - 0.2).abs() < 1e-15);
        assert!((r.p_hat[0] - 1.0).abs() < 1e-15 && r.p_hat[1] == 0.0);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let b = [0.2, 0.0, 0.5, 0.3];
        let r = project_simplex(&b).unwrap();
        assert_eq!(r.p_hat, b);
        assert_eq!(r.xi, 0.0);
        assert_eq!(r.correction_norm, 0.0);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(project_simplex(&[0.5, 0.6]), Err(Error::NotNormalized { .. })));
        assert!(project_simplex(&[]).is_err());
    }

    #[test]
    fn output_is_a_pmf() {
        let r = project_simplex(&[3.0, -1.5, 0.2, -0.7]).unwrap();
        assert!(r.p_hat.iter().all(|&p| p >= 0.0));
        assert!((r.p_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
