//! Evaluation metrics: support edit distance, element-wise error norms,
//! sparsistency/sign-consistency verdicts, and the composite precision
//! estimate.

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::model::{support_off, SupportSet};

/// Support-recovery verdict for an estimated matrix against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyVerdict {
    /// Estimated support equals the true support exactly.
    pub sparsistent: bool,
    /// Sparsistent and all signs agree on the support.
    pub sign_consistent: bool,
    /// Edit distance between the supports.
    pub support_errors: usize,
    /// Maximum absolute entrywise estimation error.
    pub linf_error: f64,
}

/// Size of the symmetric difference between two edge sets on the same nodes.
pub fn edit_distance(a: &SupportSet, b: &SupportSet) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    let only_a = a.iter().filter(|&(i, j)| !b.contains(i, j)).count();
    let only_b = b.iter().filter(|&(i, j)| !a.contains(i, j)).count();
    Ok(only_a + only_b)
}

/// Maximum absolute entrywise difference.
pub fn linf_error(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    let mut worst = 0.0_f64;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    Ok(worst)
}

/// Compare an estimate against the truth: estimated support at `threshold`,
/// true support at the exact zero pattern.
pub fn consistency(
    estimate: &SymmetricMatrix,
    truth: &SymmetricMatrix,
    threshold: f64,
) -> Result<ConsistencyVerdict> {
    let est_support = support_off(estimate, threshold);
    let true_support = support_off(truth, 0.0);
    let support_errors = edit_distance(&est_support, &true_support)?;
    let sparsistent = support_errors == 0;
    let signs_match = sparsistent
        && true_support
            .iter()
            .all(|(i, j)| estimate.get(i, j).signum() == truth.get(i, j).signum());
    Ok(ConsistencyVerdict {
        sparsistent,
        sign_consistent: sparsistent && signs_match,
        support_errors,
        linf_error: linf_error(estimate, truth)?,
    })
}

/// Precision matrix of the composed estimate: `(J_M^{-1} + Sigma_R)^{-1}`.
pub fn composite_precision(
    j_m_hat: &SymmetricMatrix,
    sigma_r_hat: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    if j_m_hat.dim() != sigma_r_hat.dim() {
        return Err(Error::DimMismatch(j_m_hat.dim(), sigma_r_hat.dim()));
    }
    let sigma = j_m_hat.inverse_spd()?.add(sigma_r_hat)?;
    sigma.inverse_spd().map_err(|_| Error::CompositeNotPD)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn edit_distance_examples() {
        let a = SupportSet::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(edit_distance(&a, &a).unwrap(), 0);
        let b = SupportSet::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(edit_distance(&a, &b).unwrap(), 2);
        let empty = SupportSet::new(4);
        assert_eq!(edit_distance(&empty, &a).unwrap(), 2);
        let other_dim = SupportSet::new(5);
        assert!(matches!(
            edit_distance(&a, &other_dim),
            Err(Error::DimMismatch(4, 5))
        ));
    }

    #[test]
    fn linf_error_examples() {
        let id = SymmetricMatrix::identity(3);
        assert_eq!(linf_error(&id, &id).unwrap(), 0.0);
        let mut bumped = id.clone();
        bumped.set(1, 1, 1.1);
        assert!((linf_error(&id, &bumped).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn consistency_examples() {
        let truth = sym(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let v = consistency(&truth, &truth, 1e-8).unwrap();
        assert_eq!(
            v,
            ConsistencyVerdict {
                sparsistent: true,
                sign_consistent: true,
                support_errors: 0,
                linf_error: 0.0
            }
        );

        // One sign flipped on the support: sparsistent, not sign consistent.
        let flipped = sym(&[&[1.0, -0.5], &[-0.5, 1.0]]);
        let v = consistency(&flipped, &truth, 1e-8).unwrap();
        assert!(v.sparsistent && !v.sign_consistent);
        assert_eq!(v.support_errors, 0);
        assert!(v.linf_error > 0.0);

        // A true edge below threshold in the estimate: support error 1.
        let missing = sym(&[&[1.0, 1e-12], &[1e-12, 1.0]]);
        let v = consistency(&missing, &truth, 1e-8).unwrap();
        assert!(!v.sparsistent && !v.sign_consistent);
        assert_eq!(v.support_errors, 1);
    }

    #[test]
    fn sparsistency_is_monotone_in_threshold_below_the_signal() {
        // Well-separated magnitudes: noise at 1e-9, signal at 0.5. As the
        // threshold sweeps upward through the gap, the verdict switches from
        // false to true exactly once and stays true below the signal level.
        let truth = sym(&[&[1.0, 0.5, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let est = sym(&[&[1.0, 0.5, 1e-9], &[0.5, 1.0, -1e-9], &[1e-9, -1e-9, 1.0]]);
        let mut seen_true = false;
        for threshold in [1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 0.4] {
            let v = consistency(&est, &truth, threshold).unwrap();
            if seen_true {
                assert!(v.sparsistent, "verdict regressed at threshold {threshold}");
            }
            seen_true |= v.sparsistent;
        }
        assert!(seen_true);
    }

    #[test]
    fn sign_consistency_implies_sparsistency() {
        let truth = sym(&[&[1.0, 0.3], &[0.3, 1.0]]);
        let est = sym(&[&[1.0, 0.2], &[0.2, 1.0]]);
        let v = consistency(&est, &truth, 1e-8).unwrap();
        assert!(!v.sign_consistent || v.sparsistent);
    }

    #[test]
    fn composite_precision_examples() {
        let j = sym(&[&[2.0, 0.1], &[0.1, 1.0]]);
        let zero = SymmetricMatrix::zeros(2);
        let back = composite_precision(&j, &zero).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert!((back.get(i, k) - j.get(i, k)).abs() < 1e-9);
            }
        }
        assert_eq!(
            composite_precision(&SymmetricMatrix::identity(3), &SymmetricMatrix::zeros(3)).unwrap(),
            SymmetricMatrix::identity(3)
        );

        // Direct inverse oracle on the closed-form pair:
        // sigma = [[4/3, -23/30], [-23/30, 4/3]], det = 16/9 - (23/30)^2 = 1.19.
        let j_m = sym(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let sigma_r = sym(&[&[0.0, -0.1], &[-0.1, 0.0]]);
        let prec = composite_precision(&j_m, &sigma_r).unwrap();
        let det = 16.0 / 9.0 - (23.0_f64 / 30.0).powi(2);
        assert!((det - 1.19).abs() < 1e-12);
        assert!((prec.get(0, 0) - (4.0 / 3.0) / det).abs() < 1e-9);
        assert!((prec.get(0, 1) - (23.0 / 30.0) / det).abs() < 1e-9);
        assert!((prec.get(0, 0) - 1.1204).abs() < 1e-4);
        assert!((prec.get(0, 1) - 0.6443).abs() < 1e-4);
    }

    #[test]
    fn composite_precision_rejects_indefinite_sum() {
        let j = SymmetricMatrix::identity(2);
        let sigma_r = sym(&[&[0.0, -3.0], &[-3.0, 0.0]]);
        assert!(matches!(
            composite_precision(&j, &sigma_r),
            Err(Error::CompositeNotPD)
        ));
    }
}
