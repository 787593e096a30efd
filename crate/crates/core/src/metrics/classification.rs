//! Concept and cancer AUROC on detections matched to ground truth.

use serde::{Deserialize, Serialize};

use super::{delong_ci, AurocEstimate, ImageEval, MetricsError};
use crate::geometry::{match_greedy_one_to_one, GeometryKind, IouMatrix};
use crate::lexicon::Concept;
use crate::real::Real;

/// Quantity being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationTarget {
    Cancer,
    Concept(Concept),
}

impl ClassificationTarget {
    pub fn name(self) -> String {
        match self {
            ClassificationTarget::Cancer => "cancer".into(),
            ClassificationTarget::Concept(c) => c.name().into(),
        }
    }
}

/// What happens to detections with no ground truth at the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedPolicy {
    /// Left out of the scored population.
    #[default]
    Exclude,
    /// Scored with a negative label.
    AsNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedAuroc<T: Real = f64> {
    pub target: ClassificationTarget,
    pub iou_threshold: T,
    pub n_detections: usize,
    pub n_matched: usize,
    pub estimate: AurocEstimate<T>,
}

/// Scores and labels of the population scored at `iou_threshold`.
pub fn matched_scores<T: Real>(
    images: &[ImageEval<'_, T>],
    iou_threshold: T,
    target: ClassificationTarget,
    kind: GeometryKind,
    policy: UnmatchedPolicy,
) -> Result<(Vec<T>, Vec<bool>, usize), MetricsError> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut n_matched = 0;
    for im in images {
        let ious = IouMatrix::compute(im.detections, im.ground_truths, kind)?;
        let det_scores: Vec<T> = im.detections.iter().map(|d| d.score).collect();
        let m = match_greedy_one_to_one(&ious, &det_scores, iou_threshold);
        for (d, det) in im.detections.iter().enumerate() {
            let label = match m.gt_for(d) {
                Some(g) => {
                    n_matched += 1;
                    let gt = &im.ground_truths[g];
                    match target {
                        ClassificationTarget::Cancer => gt.malignant,
                        ClassificationTarget::Concept(c) => gt.labels().get(c),
                    }
                }
                None if policy == UnmatchedPolicy::AsNegative => false,
                None => continue,
            };
            let score = match target {
                ClassificationTarget::Cancer => det
                    .cancer_prob
                    .ok_or_else(|| MetricsError::MissingCancerProb(det.image_id.clone()))?,
                ClassificationTarget::Concept(c) => det.concept_logits.get(c),
            };
            scores.push(score);
            labels.push(label);
        }
    }
    Ok((scores, labels, n_matched))
}

/// DeLong AUROC over detections matched one-to-one at `iou_threshold`.
pub fn matched_classification_auroc<T: Real>(
    images: &[ImageEval<'_, T>],
    iou_threshold: T,
    target: ClassificationTarget,
    kind: GeometryKind,
    policy: UnmatchedPolicy,
    level: T,
) -> Result<MatchedAuroc<T>, MetricsError> {
    let (scores, labels, n_matched) = matched_scores(images, iou_threshold, target, kind, policy)?;
    let estimate = delong_ci(&scores, &labels, level)?;
    Ok(MatchedAuroc {
        target,
        iou_threshold,
        n_detections: images.iter().map(|i| i.detections.len()).sum(),
        n_matched,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Detection, ExtraFields, LesionAnnotation};
    use crate::geometry::{BBox, RasterMask};
    use crate::lexicon::{ConceptLogits, MassDescriptor};

    fn gt(id: &str, x0: u32, malignant: bool, descriptor: MassDescriptor) -> LesionAnnotation {
        let px: Vec<bool> = (0..10).flat_map(|r| (0..40).map(move |c| r < 4 && c >= x0 && c < x0 + 4)).collect();
        LesionAnnotation::from_mask(id, RasterMask::from_bitmap(10, 40, &px).unwrap(), descriptor, malignant).unwrap()
    }

    fn det_on(g: &LesionAnnotation, shift: f64, logits: [f64; 5], p: f64) -> Detection {
        let b = g.bbox;
        Detection {
            image_id: "I".into(),
            bbox: BBox::new(b.x_min + shift, b.y_min, b.x_max + shift, b.y_max).unwrap(),
            mask: None,
            score: 0.9,
            concept_logits: ConceptLogits::new(logits).unwrap(),
            side_features: vec![],
            cancer_prob: Some(p),
            extra: ExtraFields::new(),
        }
    }

    fn fixture(shift: f64) -> (Vec<LesionAnnotation>, Vec<Detection>) {
        let mal = MassDescriptor::parse("irregular", "not parallel", "spiculated", "hypoechoic", "shadowing").unwrap();
        let gts = vec![
            gt("g0", 0, false, MassDescriptor::BENIGN),
            gt("g1", 10, true, mal),
            gt("g2", 20, false, MassDescriptor::BENIGN),
            gt("g3", 30, true, mal),
        ];
        let dets = gts
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let sign = if g.malignant { 1.0 } else { -1.0 };
                let noise = [0.3, -0.2, 0.1, 0.4, -0.1][i % 5];
                det_on(g, if i % 2 == 0 { shift } else { 0.0 }, [sign * 2.0 + noise; 5], if g.malignant { 0.8 } else { 0.2 })
            })
            .collect();
        (gts, dets)
    }

    #[test]
    fn perfect_overlay() {
        let (gts, dets) = fixture(0.0);
        let images = [ImageEval { detections: &dets, ground_truths: &gts }];
        let r = matched_classification_auroc(&images, 0.5, ClassificationTarget::Cancer, GeometryKind::Box, UnmatchedPolicy::Exclude, 0.95)
            .unwrap();
        assert_eq!(r.estimate.auc, 1.0);
        assert_eq!(r.n_matched, 4);
    }

    #[test]
    fn stricter_threshold_scores_a_subset() {
        // shifting by 1px out of 4 gives box IoU 3/5 = 0.6
        let (gts, dets) = fixture(1.0);
        let images = [ImageEval { detections: &dets, ground_truths: &gts }];
        let t = ClassificationTarget::Concept(Concept::Margin);
        let (s50, _, n50) = matched_scores(&images, 0.5, t, GeometryKind::Box, UnmatchedPolicy::Exclude).unwrap();
        let (s75, _, n75) = matched_scores(&images, 0.75, t, GeometryKind::Box, UnmatchedPolicy::Exclude).unwrap();
        assert_eq!((n50, n75), (4, 2));
        assert!(s75.len() <= s50.len());
        let (s_neg, l_neg, _) = matched_scores(&images, 0.75, t, GeometryKind::Box, UnmatchedPolicy::AsNegative).unwrap();
        assert_eq!(s_neg.len(), 4);
        assert_eq!(l_neg.iter().filter(|l| **l).count(), 2);
    }

    #[test]
    fn missing_cancer_prob() {
        let (gts, mut dets) = fixture(0.0);
        dets[0].cancer_prob = None;
        let images = [ImageEval { detections: &dets, ground_truths: &gts }];
        let r = matched_scores(&images, 0.5, ClassificationTarget::Cancer, GeometryKind::Box, UnmatchedPolicy::Exclude);
        assert!(matches!(r, Err(MetricsError::MissingCancerProb(_))));
    }
}
