//! Joins cohort and detection files into per-image evaluation sets and
//! derives head training records from them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Detection, ImageRecord};
use crate::geometry::{match_greedy_one_to_one, GeometryError, GeometryKind, IouMatrix};
use crate::heads::TrainRecord;
use crate::lexicon::{Concept, ConceptLabels, ConceptLogits};
use crate::metrics::{matched_classification_auroc, ClassificationTarget, ImageEval, MatchedAuroc, MetricsError, UnmatchedPolicy};
use crate::real::{logit, Real};

/// IoU at which detections are paired with ground truth for head training.
pub const TRAIN_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalImage<T: Real = f64> {
    pub woman_id: String,
    pub image: ImageRecord<T>,
    pub detections: Vec<Detection<T>>,
}

/// Images of a cohort with their detections, in cohort order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet<T: Real = f64> {
    pub images: Vec<EvalImage<T>>,
    /// Detections whose image is not in the cohort.
    pub n_orphan_detections: usize,
}

impl<T: Real> EvalSet<T> {
    /// Groups detections by image; per-image order follows the file.
    pub fn build(cohort: &Cohort<T>, detections: &[Detection<T>]) -> Self {
        let mut by_image: HashMap<&str, Vec<Detection<T>>> = HashMap::new();
        for d in detections {
            by_image.entry(d.image_id.as_str()).or_default().push(d.clone());
        }
        let mut images = Vec::with_capacity(cohort.n_images());
        for (w, im) in cohort.images() {
            images.push(EvalImage {
                woman_id: w.woman_id.clone(),
                image: im.clone(),
                detections: by_image.remove(im.image_id.as_str()).unwrap_or_default(),
            });
        }
        let n_orphan_detections = by_image.values().map(Vec::len).sum();
        EvalSet { images, n_orphan_detections }
    }

    pub fn views(&self) -> Vec<ImageEval<'_, T>> {
        self.images
            .iter()
            .map(|e| ImageEval { detections: &e.detections, ground_truths: &e.image.lesions })
            .collect()
    }

    pub fn n_detections(&self) -> usize {
        self.images.iter().map(|e| e.detections.len()).sum()
    }

    pub fn n_ground_truths(&self) -> usize {
        self.images.iter().map(|e| e.image.lesions.len()).sum()
    }

    pub fn find(&self, image_id: &str) -> Option<&EvalImage<T>> {
        self.images.iter().find(|e| e.image.image_id == image_id)
    }
}

/// Where training records take their concept inputs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptSource {
    /// Detector concept logits, as at inference.
    #[default]
    Predicted,
    /// Ground-truth labels encoded as logits of 0.99 / 0.01 (ablation).
    GroundTruth,
}

fn label_logits<T: Real>(labels: &ConceptLabels) -> ConceptLogits<T> {
    let hi = logit(T::lit(0.99));
    ConceptLogits::new(labels.0.map(|l| if l { hi } else { -hi })).expect("finite")
}

/// One record per detection matched one-to-one to a ground truth at
/// `iou_threshold`, labelled with that lesion's malignancy.
pub fn training_records<T: Real>(
    images: &[ImageEval<'_, T>],
    iou_threshold: T,
    kind: GeometryKind,
    source: ConceptSource,
) -> Result<Vec<TrainRecord<T>>, GeometryError> {
    let mut out = Vec::new();
    for im in images {
        let ious = IouMatrix::compute(im.detections, im.ground_truths, kind)?;
        let scores: Vec<T> = im.detections.iter().map(|d| d.score).collect();
        let m = match_greedy_one_to_one(&ious, &scores, iou_threshold);
        for p in &m.pairs {
            let det = &im.detections[p.det];
            let gt = &im.ground_truths[p.gt];
            let concept_logits = match source {
                ConceptSource::Predicted => det.concept_logits,
                ConceptSource::GroundTruth => label_logits(&gt.labels()),
            };
            out.push(TrainRecord::new(concept_logits, det.side_features.clone(), gt.malignant));
        }
    }
    Ok(out)
}

/// Per-concept AUROC of detector logits for each IoU threshold.
pub fn concept_aurocs<T: Real>(
    images: &[ImageEval<'_, T>],
    iou_thresholds: &[T],
    kind: GeometryKind,
    level: T,
) -> Result<Vec<MatchedAuroc<T>>, MetricsError> {
    let mut out = Vec::new();
    for &t in iou_thresholds {
        for c in Concept::ALL {
            out.push(matched_classification_auroc(images, t, ClassificationTarget::Concept(c), kind, UnmatchedPolicy::Exclude, level)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{simulate_cohort, SimConfig};

    #[test]
    fn build_groups_detections() {
        let out = simulate_cohort(&SimConfig { n_women: 40, ..SimConfig::default() }, 2).unwrap();
        let set = EvalSet::build(&out.cohort, &out.detections);
        assert_eq!(set.n_detections(), out.detections.len());
        assert_eq!(set.n_orphan_detections, 0);
        for e in &set.images {
            assert!(e.detections.iter().all(|d| d.image_id == e.image.image_id));
        }
        let fewer = Cohort::new(out.cohort.women[..10].to_vec());
        let set = EvalSet::build(&fewer, &out.detections);
        assert_eq!(set.n_detections() + set.n_orphan_detections, out.detections.len());
    }

    #[test]
    fn ground_truth_source_matches_labels() {
        let out = simulate_cohort(&SimConfig { n_women: 40, ..SimConfig::default() }, 2).unwrap();
        let set = EvalSet::build(&out.cohort, &out.detections);
        let views = set.views();
        let pred = training_records(&views, 0.5, GeometryKind::Mask, ConceptSource::Predicted).unwrap();
        let gt = training_records(&views, 0.5, GeometryKind::Mask, ConceptSource::GroundTruth).unwrap();
        assert_eq!(pred.len(), gt.len());
        assert!(!pred.is_empty());
        for (p, g) in pred.iter().zip(&gt) {
            assert_eq!(p.cancer_label, g.cancer_label);
            assert!(g.concept_logits.values().iter().all(|v| (v.abs() - 4.59511985013459).abs() < 1e-12));
        }
    }
}
