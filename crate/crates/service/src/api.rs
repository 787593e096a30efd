//! Request and response payloads, and the pure functions behind each
//! endpoint. Every probability is computed by the library's head forward
//! pass on the values shown in the same payload.

use std::collections::BTreeMap;

use birads_cbm::cohort::OracleDescription;
use birads_cbm::geometry::{BBox, Polygon, RasterMask};
use birads_cbm::heads::{HeadVariant, TrainedHead};
use birads_cbm::intervention::{correct_concepts, CorrectionStrategy};
use birads_cbm::lexicon::{binarize_logits, Concept, ConceptLabels, ConceptLogits, N_CONCEPTS};
use birads_cbm::real::logit;
use serde::{Deserialize, Serialize};

use crate::{ApiError, SessionBundle};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub image_id: String,
    pub woman_id: String,
    pub n_detections: usize,
    pub n_ground_truths: usize,
    pub has_ground_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePage {
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub cases: Vec<CaseSummary>,
}

pub fn list_cases(bundle: &SessionBundle, page: usize, page_size: usize) -> Result<CasePage, ApiError> {
    if page == 0 {
        return Err(ApiError::BadRequest("page starts at 1".into()));
    }
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::BadRequest(format!("page_size must lie in 1..={MAX_PAGE_SIZE}")));
    }
    let cases = bundle
        .images()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .map(|e| CaseSummary {
            image_id: e.image.image_id.clone(),
            woman_id: e.woman_id.clone(),
            n_detections: e.detections.len(),
            n_ground_truths: e.image.lesions.len(),
            has_ground_truth: !e.image.lesions.is_empty(),
        })
        .collect();
    Ok(CasePage { page, page_size, total: bundle.n_images(), cases })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthView {
    pub lesion_id: String,
    pub bbox: BBox,
    pub mask: RasterMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Polygon>,
    pub concept_labels: ConceptLabels,
    pub malignant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionView {
    pub index: usize,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RasterMask>,
    pub score: f64,
    pub concept_logits: ConceptLogits,
    pub concept_probabilities: [f64; N_CONCEPTS],
    pub side_features: Vec<f64>,
    /// Keyed by head variant.
    pub cancer_prob: BTreeMap<HeadVariant, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePayload {
    pub image_id: String,
    pub woman_id: String,
    pub height: u32,
    pub width: u32,
    pub birads_assessment: String,
    pub ground_truths: Vec<GroundTruthView>,
    pub lesions: Vec<LesionView>,
}

fn head_probs<'a>(
    heads: impl Iterator<Item = &'a TrainedHead>,
    logits: &ConceptLogits,
    side: &[f64],
) -> Result<BTreeMap<HeadVariant, f64>, ApiError> {
    heads
        .map(|h| {
            h.forward(logits, side)
                .map(|p| (h.variant(), p))
                .map_err(|e| ApiError::BadRequest(format!("{} head: {e}", h.variant())))
        })
        .collect()
}

pub fn case_payload(bundle: &SessionBundle, image_id: &str) -> Result<CasePayload, ApiError> {
    let e = bundle.image(image_id).ok_or_else(|| ApiError::NotFound(format!("unknown image_id `{image_id}`")))?;
    let ground_truths = e
        .image
        .lesions
        .iter()
        .map(|l| GroundTruthView {
            lesion_id: l.lesion_id.clone(),
            bbox: l.bbox,
            mask: l.mask.clone(),
            polygon: l.polygon.clone(),
            concept_labels: l.labels(),
            malignant: l.malignant,
        })
        .collect();
    let lesions = e
        .detections
        .iter()
        .enumerate()
        .map(|(index, d)| {
            Ok(LesionView {
                index,
                bbox: d.bbox,
                mask: d.mask.clone(),
                score: d.score,
                concept_logits: d.concept_logits,
                concept_probabilities: d.concept_logits.probabilities(),
                side_features: d.side_features.clone(),
                cancer_prob: head_probs(bundle.heads(), &d.concept_logits, &d.side_features)?,
            })
        })
        .collect::<Result<_, ApiError>>()?;
    Ok(CasePayload {
        image_id: e.image.image_id.clone(),
        woman_id: e.woman_id.clone(),
        height: e.image.height,
        width: e.image.width,
        birads_assessment: e.image.birads_assessment.clone(),
        ground_truths,
        lesions,
    })
}

/// A user's statement about one concept: a class (mapped to the
/// strategy's target) or an explicit pseudo-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptEdit {
    pub concept: Concept,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

fn default_strategy() -> CorrectionStrategy {
    CorrectionStrategy::Minimal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterveneRequest {
    pub image_id: String,
    pub lesion_index: usize,
    #[serde(default)]
    pub edits: Vec<ConceptEdit>,
    #[serde(default = "default_strategy")]
    pub strategy: CorrectionStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    None,
    Label,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLog {
    pub concept: Concept,
    pub kind: EditKind,
    pub original: f64,
    pub corrected: f64,
    /// The edit disagreed with the predicted class.
    pub was_wrong: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterveneResponse {
    pub image_id: String,
    pub lesion_index: usize,
    pub strategy: CorrectionStrategy,
    pub original_logits: ConceptLogits,
    pub corrected_logits: ConceptLogits,
    pub corrected_probabilities: [f64; N_CONCEPTS],
    pub cancer_prob: BTreeMap<HeadVariant, f64>,
    pub log: Vec<EditLog>,
}

/// Stateless what-if: the bundle is never modified.
pub fn intervene(bundle: &SessionBundle, req: &InterveneRequest) -> Result<InterveneResponse, ApiError> {
    let e = bundle.image(&req.image_id).ok_or_else(|| ApiError::NotFound(format!("unknown image_id `{}`", req.image_id)))?;
    let det = e.detections.get(req.lesion_index).ok_or_else(|| {
        ApiError::NotFound(format!("image `{}` has {} lesions; no index {}", req.image_id, e.detections.len(), req.lesion_index))
    })?;
    let original = det.concept_logits;
    let predicted = binarize_logits(&original);

    let mut kinds = [EditKind::None; N_CONCEPTS];
    let mut truth = predicted;
    let mut overrides = [None; N_CONCEPTS];
    for edit in &req.edits {
        let i = edit.concept.index();
        if kinds[i] != EditKind::None {
            return Err(ApiError::BadRequest(format!("concept `{}` edited twice", edit.concept)));
        }
        match (edit.label, edit.probability) {
            (Some(label), None) => {
                kinds[i] = EditKind::Label;
                truth.0[i] = label;
            }
            (None, Some(p)) => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(ApiError::BadRequest(format!(
                        "probability for `{}` must lie strictly between 0 and 1, got {p}",
                        edit.concept
                    )));
                }
                kinds[i] = EditKind::Probability;
                overrides[i] = Some(logit(p));
            }
            _ => {
                return Err(ApiError::BadRequest(format!(
                    "edit for `{}` needs exactly one of `label` or `probability`",
                    edit.concept
                )))
            }
        }
    }

    let (label_corrected, _) = correct_concepts(&original, &truth, req.strategy);
    let mut values = *label_corrected.values();
    for (v, o) in values.iter_mut().zip(overrides) {
        if let Some(x) = o {
            *v = x;
        }
    }
    let corrected = ConceptLogits::new(values).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let log = Concept::ALL
        .into_iter()
        .map(|c| {
            let i = c.index();
            let was_wrong = match kinds[i] {
                EditKind::None => false,
                EditKind::Label => truth.0[i] != predicted.0[i],
                EditKind::Probability => (values[i] >= 0.0) != predicted.0[i],
            };
            EditLog { concept: c, kind: kinds[i], original: original.values()[i], corrected: values[i], was_wrong }
        })
        .collect();
    Ok(InterveneResponse {
        image_id: req.image_id.clone(),
        lesion_index: req.lesion_index,
        strategy: req.strategy,
        original_logits: original,
        corrected_logits: corrected,
        corrected_probabilities: corrected.probabilities(),
        cancer_prob: head_probs(bundle.heads(), &corrected, &det.side_features)?,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub concept_logits: Vec<f64>,
    #[serde(default)]
    pub side_features: Vec<f64>,
    pub variant: HeadVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub variant: HeadVariant,
    pub cancer_prob: f64,
}

pub fn predict(bundle: &SessionBundle, req: &PredictRequest) -> Result<PredictResponse, ApiError> {
    let logits = ConceptLogits::from_slice(&req.concept_logits).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let head = bundle
        .head(req.variant)
        .ok_or_else(|| ApiError::BadRequest(format!("no {} head is loaded", req.variant)))?;
    let p = head.forward(&logits, &req.side_features).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(PredictResponse { variant: req.variant, cancer_prob: p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub loaded: bool,
    pub n_images: usize,
    pub variants: Vec<HeadVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleDescription>,
}
