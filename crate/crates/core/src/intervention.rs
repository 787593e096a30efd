//! Concept correction and evaluation of heads on corrected concepts.
//!
//! A concept is wrong when its thresholded prediction disagrees with the
//! ground-truth label. Wrong concepts are replaced by `logit(q)` where `q`
//! is the strategy's target pseudo-probability for the true class:
//! 0.51 / 0.49 for minimal correction, 0.99 / 0.01 for maximal.
//!
//! Within an image, a lone ground truth corrects every detection whatever
//! the overlap, while several ground truths are assigned by maximum IoU and
//! zero-overlap detections are left alone. The asymmetry is deliberate.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Detection, LesionAnnotation};
use crate::geometry::{match_max_iou, GeometryError, GeometryKind, IouMatrix};
use crate::heads::{HeadError, HeadVariant, TrainedHead};
use crate::lexicon::{binarize_logits, Concept, ConceptLabels, ConceptLogits, N_CONCEPTS};
use crate::metrics::{matched_classification_auroc, AurocEstimate, ClassificationTarget, ImageEval, MetricsError, UnmatchedPolicy};
use crate::real::{logit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionStrategy {
    None,
    Minimal,
    Maximal,
}

impl CorrectionStrategy {
    pub const ALL: [CorrectionStrategy; 3] = [CorrectionStrategy::None, CorrectionStrategy::Minimal, CorrectionStrategy::Maximal];

    pub fn name(self) -> &'static str {
        match self {
            CorrectionStrategy::None => "none",
            CorrectionStrategy::Minimal => "minimal",
            CorrectionStrategy::Maximal => "maximal",
        }
    }

    /// Target pseudo-probability for a concept whose true label is `truth`.
    pub fn target<T: Real>(self, truth: bool) -> Option<T> {
        let q = match self {
            CorrectionStrategy::None => return None,
            CorrectionStrategy::Minimal => 0.51,
            CorrectionStrategy::Maximal => 0.99,
        };
        Some(T::lit(if truth { q } else { 1.0 - q }))
    }

    pub fn target_logit<T: Real>(self, truth: bool) -> Option<T> {
        self.target::<T>(truth).map(logit)
    }
}

impl std::fmt::Display for CorrectionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        CorrectionStrategy::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| format!("unknown correction strategy `{s}` (expected none, minimal or maximal)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptCorrection<T: Real = f64> {
    pub concept: Concept,
    pub original: T,
    pub corrected: T,
    pub was_wrong: bool,
}

/// Audit record for one detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct InterventionLog<T: Real = f64> {
    pub image_id: String,
    pub detection_index: usize,
    pub matched_gt: Option<String>,
    pub strategy: CorrectionStrategy,
    pub concepts: Vec<ConceptCorrection<T>>,
}

impl<T: Real> InterventionLog<T> {
    pub fn n_wrong(&self) -> usize {
        self.concepts.iter().filter(|c| c.was_wrong).count()
    }

    pub fn n_changed(&self) -> usize {
        self.concepts.iter().filter(|c| c.corrected != c.original).count()
    }
}

/// Replaces every wrong concept by the strategy's target logit.
pub fn correct_concepts<T: Real>(
    pred: &ConceptLogits<T>,
    truth: &ConceptLabels,
    strategy: CorrectionStrategy,
) -> (ConceptLogits<T>, Vec<ConceptCorrection<T>>) {
    let predicted = binarize_logits(pred);
    let mut out = *pred;
    let mut log = Vec::with_capacity(N_CONCEPTS);
    for (i, concept) in Concept::ALL.into_iter().enumerate() {
        let original = pred.values()[i];
        let was_wrong = predicted.0[i] != truth.0[i];
        let corrected = match strategy.target_logit::<T>(truth.0[i]) {
            Some(t) if was_wrong => t,
            _ => original,
        };
        out.set(i, corrected);
        log.push(ConceptCorrection { concept, original, corrected, was_wrong });
    }
    (out, log)
}

/// Ground-truth index each detection is corrected toward.
pub fn correction_targets<T: Real>(
    dets: &[Detection<T>],
    gts: &[LesionAnnotation<T>],
    kind: GeometryKind,
) -> Result<Vec<Option<usize>>, GeometryError> {
    Ok(match gts.len() {
        0 => vec![None; dets.len()],
        1 => vec![Some(0); dets.len()],
        _ => {
            let m = match_max_iou(&IouMatrix::compute(dets, gts, kind)?);
            (0..dets.len()).map(|d| m.gt_for(d)).collect()
        }
    })
}

/// Corrects the concepts of every detection in one image.
///
/// Corrected detections lose their `cancer_prob`, which no longer matches
/// their concepts; untouched detections keep every field.
pub fn intervene_image<T: Real>(
    dets: &[Detection<T>],
    gts: &[LesionAnnotation<T>],
    strategy: CorrectionStrategy,
    kind: GeometryKind,
) -> Result<(Vec<Detection<T>>, Vec<InterventionLog<T>>), GeometryError> {
    let targets = correction_targets(dets, gts, kind)?;
    let mut out = Vec::with_capacity(dets.len());
    let mut logs = Vec::with_capacity(dets.len());
    for (i, (det, target)) in dets.iter().zip(targets).enumerate() {
        let mut d = det.clone();
        let concepts = match target {
            Some(g) => {
                let (corrected, log) = correct_concepts(&det.concept_logits, &gts[g].labels(), strategy);
                if corrected != det.concept_logits {
                    d.concept_logits = corrected;
                    d.cancer_prob = None;
                }
                log
            }
            None => Vec::new(),
        };
        logs.push(InterventionLog {
            image_id: det.image_id.clone(),
            detection_index: i,
            matched_gt: target.map(|g| gts[g].lesion_id.clone()),
            strategy,
            concepts,
        });
        out.push(d);
    }
    Ok((out, logs))
}

/// One JSON object per line.
pub fn render_logs<T: Real + Serialize>(logs: &[InterventionLog<T>]) -> String {
    logs.iter().map(|l| serde_json::to_string(l).expect("log serializes") + "\n").collect()
}

/// Sets `cancer_prob` on every detection from the head.
pub fn score_detections<T: Real>(head: &TrainedHead<T>, dets: &[Detection<T>]) -> Result<Vec<Detection<T>>, HeadError> {
    dets.iter()
        .map(|d| {
            let mut d = d.clone();
            d.cancer_prob = Some(head.forward(&d.concept_logits, &d.side_features)?);
            Ok(d)
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum InterventionError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionRow<T: Real = f64> {
    pub variant: HeadVariant,
    pub strategy: CorrectionStrategy,
    pub iou_threshold: T,
    pub n_detections: usize,
    pub n_matched: usize,
    /// Detections whose concepts changed.
    pub n_corrected: usize,
    pub estimate: AurocEstimate<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionReport<T: Real = f64> {
    pub geometry: GeometryKind,
    pub rows: Vec<CorrectionRow<T>>,
}

impl<T: Real> CorrectionReport<T> {
    pub fn get(&self, variant: HeadVariant, strategy: CorrectionStrategy, iou_threshold: T) -> Option<&CorrectionRow<T>> {
        self.rows.iter().find(|r| r.variant == variant && r.strategy == strategy && r.iou_threshold == iou_threshold)
    }
}

/// Cancer AUROC per head, strategy and IoU threshold after correction.
///
/// Side features are never corrected. Rows are ordered by head, then
/// strategy, then threshold, following the argument order.
pub fn evaluate_with_correction<T: Real>(
    images: &[ImageEval<'_, T>],
    heads: &[&TrainedHead<T>],
    strategies: &[CorrectionStrategy],
    iou_thresholds: &[T],
    kind: GeometryKind,
    level: T,
) -> Result<CorrectionReport<T>, InterventionError> {
    let mut rows = Vec::new();
    for head in heads {
        for &strategy in strategies {
            let mut corrected = Vec::with_capacity(images.len());
            let mut n_corrected = 0;
            for im in images {
                let (dets, logs) = intervene_image(im.detections, im.ground_truths, strategy, kind)?;
                n_corrected += logs.iter().filter(|l| l.n_changed() > 0).count();
                corrected.push(score_detections(head, &dets)?);
            }
            let views: Vec<ImageEval<'_, T>> = corrected
                .iter()
                .zip(images)
                .map(|(d, im)| ImageEval { detections: d, ground_truths: im.ground_truths })
                .collect();
            for &t in iou_thresholds {
                let r = matched_classification_auroc(&views, t, ClassificationTarget::Cancer, kind, UnmatchedPolicy::Exclude, level)?;
                rows.push(CorrectionRow {
                    variant: head.variant(),
                    strategy,
                    iou_threshold: t,
                    n_detections: r.n_detections,
                    n_matched: r.n_matched,
                    n_corrected,
                    estimate: r.estimate,
                });
            }
        }
    }
    Ok(CorrectionReport { geometry: kind, rows })
}
