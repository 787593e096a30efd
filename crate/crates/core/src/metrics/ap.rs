//! COCO-style average precision.
//!
//! Per image the top `max_dets` detections by score are kept. For each IoU
//! threshold in 0.50:0.05:0.95 detections are greedily matched one-to-one,
//! pooled over images in descending score order, and the precision
//! envelope is sampled at the 101 recall points 0.00, 0.01, ..., 1.00.

use serde::Serialize;

use super::{ImageEval, MetricsError};
use crate::geometry::{match_greedy_one_to_one, score_order, GeometryKind, IouMatrix};
use crate::real::Real;

/// Detections retained per image.
pub const DEFAULT_MAX_DETS: usize = 10;

/// Scores and IoU table for one image.
#[derive(Debug, Clone)]
pub struct ScoredImage<T: Real = f64> {
    pub scores: Vec<T>,
    pub ious: IouMatrix<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApScores<T: Real = f64> {
    pub ap: T,
    pub ap50: T,
    pub ap75: T,
    /// `(iou_threshold, AP)` for each of the ten thresholds.
    pub per_threshold: Vec<(T, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApReport<T: Real = f64> {
    #[serde(rename = "box")]
    pub bbox: ApScores<T>,
    pub mask: ApScores<T>,
    pub n_images: usize,
    pub n_ground_truths: usize,
    pub n_detections: usize,
    pub max_dets: usize,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95, each the double nearest `k/100`.
pub fn iou_thresholds<T: Real>() -> [T; 10] {
    std::array::from_fn(|i| T::lit((50 + 5 * i) as f64) / T::lit(100.0))
}

fn recall_thresholds<T: Real>() -> impl Iterator<Item = T> {
    (0..=100).map(|k| T::lit(k as f64) / T::lit(100.0))
}

/// Average precision from precomputed per-image IoU tables.
pub fn average_precision_from_ious<T: Real>(
    images: &[ScoredImage<T>],
    max_dets: usize,
) -> Result<ApScores<T>, MetricsError> {
    let n_gt: usize = images.iter().map(|im| im.ious.n_gts()).sum();
    if n_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let kept: Vec<(Vec<T>, IouMatrix<T>)> = images
        .iter()
        .map(|im| {
            assert_eq!(im.scores.len(), im.ious.n_dets(), "one score per detection");
            let mut order = score_order(&im.scores);
            order.truncate(max_dets);
            let scores = order.iter().map(|&i| im.scores[i]).collect();
            (scores, im.ious.select_rows(&order))
        })
        .collect();

    // pooled in image order then per-image rank; a stable sort keeps that
    // order among equal scores
    let mut pooled_scores = Vec::new();
    for (scores, _) in &kept {
        pooled_scores.extend_from_slice(scores);
    }
    let pooled_order = score_order(&pooled_scores);

    let n_gt_t = T::from_usize_lossy(n_gt);
    let mut per_threshold = Vec::with_capacity(10);
    for t in iou_thresholds::<T>() {
        let mut is_tp = Vec::with_capacity(pooled_scores.len());
        for (scores, ious) in &kept {
            let m = match_greedy_one_to_one(ious, scores, t);
            is_tp.extend((0..scores.len()).map(|d| m.gt_for(d).is_some()));
        }
        let mut recall = Vec::with_capacity(is_tp.len());
        let mut precision = Vec::with_capacity(is_tp.len());
        let (mut tp, mut fp) = (T::zero(), T::zero());
        for &i in &pooled_order {
            if is_tp[i] {
                tp += T::one();
            } else {
                fp += T::one();
            }
            recall.push(tp / n_gt_t);
            precision.push(tp / (tp + fp));
        }
        for i in (1..precision.len()).rev() {
            if precision[i] > precision[i - 1] {
                precision[i - 1] = precision[i];
            }
        }
        let mut sum = T::zero();
        for r in recall_thresholds::<T>() {
            let idx = recall.partition_point(|&x| x < r);
            if idx < precision.len() {
                sum += precision[idx];
            }
        }
        per_threshold.push((t, sum / T::lit(101.0)));
    }
    let ap = per_threshold.iter().map(|(_, v)| *v).sum::<T>() / T::lit(10.0);
    Ok(ApScores { ap, ap50: per_threshold[0].1, ap75: per_threshold[5].1, per_threshold })
}

/// Average precision on box or mask geometry.
pub fn average_precision<T: Real>(
    images: &[ImageEval<'_, T>],
    kind: GeometryKind,
    max_dets: usize,
) -> Result<ApScores<T>, MetricsError> {
    let scored = images
        .iter()
        .map(|im| {
            Ok(ScoredImage {
                scores: im.detections.iter().map(|d| d.score).collect(),
                ious: IouMatrix::compute(im.detections, im.ground_truths, kind)?,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    average_precision_from_ious(&scored, max_dets)
}

/// Box and mask AP side by side.
pub fn detection_report<T: Real>(images: &[ImageEval<'_, T>], max_dets: usize) -> Result<ApReport<T>, MetricsError> {
    Ok(ApReport {
        bbox: average_precision(images, GeometryKind::Box, max_dets)?,
        mask: average_precision(images, GeometryKind::Mask, max_dets)?,
        n_images: images.len(),
        n_ground_truths: images.iter().map(|i| i.ground_truths.len()).sum(),
        n_detections: images.iter().map(|i| i.detections.len()).sum(),
        max_dets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(scores: &[f64], rows: &[&[f64]], n_gt: usize) -> ScoredImage<f64> {
        ScoredImage {
            scores: scores.to_vec(),
            ious: IouMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect(), n_gt).unwrap(),
        }
    }

    #[test]
    fn thresholds_are_exact_hundredths() {
        let t = iou_thresholds::<f64>();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[6], 0.8);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn perfect_detection() {
        let r = average_precision_from_ious(&[image(&[1.0], &[&[1.0]], 1)], 10).unwrap();
        assert_eq!((r.ap, r.ap50, r.ap75), (1.0, 1.0, 1.0));
    }

    #[test]
    fn no_detections() {
        let r = average_precision_from_ious(&[image(&[], &[], 1)], 10).unwrap();
        assert_eq!((r.ap, r.ap50, r.ap75), (0.0, 0.0, 0.0));
    }

    #[test]
    fn no_ground_truth_is_error() {
        assert!(matches!(
            average_precision_from_ious(&[image(&[0.5], &[&[]], 0)], 10),
            Err(MetricsError::NoGroundTruth)
        ));
    }

    #[test]
    fn worked_example() {
        // TP for thresholds 0.50..=0.80 (7 of 10); the FP ranks below it.
        let r = average_precision_from_ious(&[image(&[0.9, 0.8], &[&[0.8], &[0.0]], 1)], 10).unwrap();
        assert_eq!(r.ap50, 1.0);
        assert_eq!(r.ap75, 1.0);
        assert!((r.ap - 0.7).abs() < 1e-15);
    }

    #[test]
    fn max_dets_truncates_by_score() {
        // the only true positive has the lowest score and is dropped
        let rows: Vec<Vec<f64>> = (0..11).map(|i| vec![if i == 10 { 1.0 } else { 0.0 }]).collect();
        let scores: Vec<f64> = (0..11).map(|i| 1.0 - i as f64 * 0.05).collect();
        let im = ScoredImage { scores, ious: IouMatrix::from_rows(rows, 1).unwrap() };
        assert_eq!(average_precision_from_ious(&[im.clone()], 10).unwrap().ap, 0.0);
        assert!(average_precision_from_ious(&[im], 11).unwrap().ap > 0.0);
    }
}
