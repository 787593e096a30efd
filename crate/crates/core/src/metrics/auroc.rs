//! Mann-Whitney AUROC and DeLong confidence intervals.
//!
//! The variance uses the midrank formulation of DeLong's structural
//! components, which needs three sorts instead of an `O(m n)` pair scan.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::MetricsError;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AurocEstimate<T: Real = f64> {
    pub auc: T,
    pub variance: T,
    pub ci_low: T,
    pub ci_high: T,
    pub level: T,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// 1-based ranks with ties replaced by their mean rank.
pub fn midranks<T: Real>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean((i+1)..=(j+1))
        let rank = T::from_usize_lossy(i + j + 2) / T::lit(2.0);
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn check_inputs<T: Real>(scores: &[T], labels: &[bool]) -> Result<(usize, usize), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass { n_pos, n_neg });
    }
    Ok((n_pos, n_neg))
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half.
pub fn auroc<T: Real>(scores: &[T], labels: &[bool]) -> Result<T, MetricsError> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let ranks = midranks(scores);
    let pos_rank_sum: T = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| *r).sum();
    let (m, n) = (T::from_usize_lossy(n_pos), T::from_usize_lossy(n_neg));
    Ok((pos_rank_sum - m * (m + T::one()) / T::lit(2.0)) / (m * n))
}

fn sample_variance<T: Real>(xs: &[T]) -> T {
    let n = T::from_usize_lossy(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
}

/// Two-sided standard normal quantile for a confidence `level`.
pub fn normal_quantile(level: f64) -> Result<f64, MetricsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::BadLevel(level));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std_normal.inverse_cdf(0.5 + level / 2.0))
}

/// AUROC with a DeLong normal-approximation interval clipped to `[0, 1]`.
pub fn delong_ci<T: Real>(scores: &[T], labels: &[bool], level: T) -> Result<AurocEstimate<T>, MetricsError> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    if n_pos < 2 || n_neg < 2 {
        return Err(MetricsError::TooFewForVariance { n_pos, n_neg });
    }
    let z = T::lit(normal_quantile(level.to_f64_lossy())?);

    let pos: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<T> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let rank_pos = midranks(&pos);
    let rank_neg = midranks(&neg);
    let combined: Vec<T> = pos.iter().chain(&neg).copied().collect();
    let rank_all = midranks(&combined);

    let (m, n) = (T::from_usize_lossy(n_pos), T::from_usize_lossy(n_neg));
    // structural components: per-positive fraction of negatives beaten,
    // per-negative fraction of positives it loses to
    let v_pos: Vec<T> = (0..n_pos).map(|i| (rank_all[i] - rank_pos[i]) / n).collect();
    let v_neg: Vec<T> = (0..n_neg).map(|j| T::one() - (rank_all[n_pos + j] - rank_neg[j]) / m).collect();

    let auc = v_pos.iter().copied().sum::<T>() / m;
    let variance = (sample_variance(&v_pos) / m + sample_variance(&v_neg) / n).max(T::zero());
    let half = z * variance.sqrt();
    Ok(AurocEstimate {
        auc,
        variance,
        ci_low: (auc - half).max(T::zero()),
        ci_high: (auc + half).min(T::one()),
        level,
        n_pos,
        n_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        num / den
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &[false, true, false, true]).unwrap(), 0.5);
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(pair_count(&s, &l), 0.75);
        assert_eq!(auroc(&s, &l).unwrap(), 0.75);
    }

    #[test]
    fn auroc_errors() {
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(MetricsError::SingleClass { n_pos: 2, n_neg: 0 })));
        assert!(auroc(&[0.1], &[true, false]).is_err());
        assert!(auroc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn delong_separated_has_zero_variance() {
        let e = delong_ci(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true], 0.95).unwrap();
        assert_eq!((e.auc, e.variance, e.ci_low, e.ci_high), (1.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn delong_errors() {
        assert!(delong_ci(&[0.1, 0.2, 0.3], &[true; 3], 0.95).is_err());
        assert!(matches!(
            delong_ci(&[0.1, 0.2, 0.3], &[true, false, false], 0.95),
            Err(MetricsError::TooFewForVariance { .. })
        ));
        assert!(delong_ci(&[0.1, 0.2, 0.3, 0.4], &[true, false, true, false], 1.0).is_err());
    }

    /// Textbook O(mn) DeLong: placement values from the Heaviside kernel.
    fn delong_bruteforce(scores: &[f64], labels: &[bool]) -> (f64, f64) {
        let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| !**l).map(|(s, _)| *s).collect();
        let psi = |x: f64, y: f64| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
        let v10: Vec<f64> = pos.iter().map(|&x| neg.iter().map(|&y| psi(x, y)).sum::<f64>() / neg.len() as f64).collect();
        let v01: Vec<f64> = neg.iter().map(|&y| pos.iter().map(|&x| psi(x, y)).sum::<f64>() / pos.len() as f64).collect();
        let auc = v10.iter().sum::<f64>() / pos.len() as f64;
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        (auc, var(&v10) / pos.len() as f64 + var(&v01) / neg.len() as f64)
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn auroc_equals_pair_count(
            data in prop::collection::vec(((0u8..20), any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 7.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
            let a = auroc(&scores, &labels).unwrap();
            prop_assert!((a - pair_count(&scores, &labels)).abs() <= 1e-12);
        }

        #[test]
        fn delong_matches_bruteforce_and_monotone_invariance(
            data in prop::collection::vec(((0u8..30), any::<bool>()), 4..50)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 10.0 - 1.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            let np = labels.iter().filter(|l| **l).count();
            prop_assume!(np >= 2 && labels.len() - np >= 2);
            let e = delong_ci(&scores, &labels, 0.95).unwrap();
            let (auc, var) = delong_bruteforce(&scores, &labels);
            prop_assert!((e.auc - auc).abs() < 1e-12);
            prop_assert!((e.variance - var).abs() < 1e-12);
            prop_assert!((e.auc - auroc(&scores, &labels).unwrap()).abs() < 1e-12);
            prop_assert!(e.variance >= 0.0);
            prop_assert!(e.ci_low <= e.auc && e.auc <= e.ci_high);
            let transformed: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(auroc(&transformed, &labels).unwrap(), auroc(&scores, &labels).unwrap());
        }
    }
}
