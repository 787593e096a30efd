//! Cohort records: women, images, annotated lesions and detections.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CohortError;
use crate::geometry::{BBox, Localized, Polygon, RasterMask};
use crate::lexicon::{ConceptLabels, ConceptLogits, MassDescriptor};
use crate::real::Real;

/// Unknown JSON fields carried through a read/write cycle untouched.
pub type ExtraFields = Map<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manufacturer {
    Philips,
    Siemens,
    Atl,
    Other,
}

impl Manufacturer {
    pub const ALL: [Manufacturer; 4] =
        [Manufacturer::Philips, Manufacturer::Siemens, Manufacturer::Atl, Manufacturer::Other];
}

/// Image-level exclusion reasons, listed in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionFlag {
    ClipMarker,
    BiopsyNeedle,
    Implant,
    BiopsySession,
    Invalid,
    Elastography,
    LinkageMissing,
    IncompleteAnnotation,
    AnnotatorUnsure,
}

impl ExclusionFlag {
    pub const PRECEDENCE: [ExclusionFlag; 9] = [
        ExclusionFlag::ClipMarker,
        ExclusionFlag::BiopsyNeedle,
        ExclusionFlag::Implant,
        ExclusionFlag::BiopsySession,
        ExclusionFlag::Invalid,
        ExclusionFlag::Elastography,
        ExclusionFlag::LinkageMissing,
        ExclusionFlag::IncompleteAnnotation,
        ExclusionFlag::AnnotatorUnsure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExclusionFlag::ClipMarker => "clip_marker",
            ExclusionFlag::BiopsyNeedle => "biopsy_needle",
            ExclusionFlag::Implant => "implant",
            ExclusionFlag::BiopsySession => "biopsy_session",
            ExclusionFlag::Invalid => "invalid",
            ExclusionFlag::Elastography => "elastography",
            ExclusionFlag::LinkageMissing => "linkage_missing",
            ExclusionFlag::IncompleteAnnotation => "incomplete_annotation",
            ExclusionFlag::AnnotatorUnsure => "annotator_unsure",
        }
    }
}

/// A radiologist-annotated lesion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct LesionAnnotation<T: Real = f64> {
    pub lesion_id: String,
    pub bbox: BBox<T>,
    pub mask: RasterMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Polygon<T>>,
    #[serde(flatten)]
    pub descriptor: MassDescriptor,
    pub malignant: bool,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl<T: Real> LesionAnnotation<T> {
    /// Builds an annotation whose box is the tight box of `mask`.
    pub fn from_mask(
        lesion_id: impl Into<String>,
        mask: RasterMask,
        descriptor: MassDescriptor,
        malignant: bool,
    ) -> Result<Self, CohortError> {
        let lesion_id = lesion_id.into();
        let bbox = mask
            .bounding_box()
            .ok_or_else(|| CohortError::invalid(&lesion_id, "mask", "empty lesion mask"))?;
        Ok(LesionAnnotation {
            lesion_id,
            bbox,
            mask,
            polygon: None,
            descriptor,
            malignant,
            extra: ExtraFields::new(),
        })
    }

    pub fn labels(&self) -> ConceptLabels {
        self.descriptor.binarize()
    }

    fn validate(&self, image: &ImageRecord<T>) -> Result<(), CohortError> {
        let id = &self.lesion_id;
        if !self.bbox.fits_within(image.height, image.width) {
            return Err(CohortError::invalid(id, "bbox", "lesion outside image bounds"));
        }
        if self.mask.height() != image.height || self.mask.width() != image.width {
            return Err(CohortError::invalid(id, "mask", "mask dimensions differ from image"));
        }
        let Some(tight) = self.mask.bounding_box::<T>() else {
            return Err(CohortError::invalid(id, "mask", "empty lesion mask"));
        };
        let half = T::lit(0.5);
        let off = tight
            .to_array()
            .iter()
            .zip(self.bbox.to_array())
            .any(|(a, b)| (*a - b).abs() > half);
        if off {
            return Err(CohortError::invalid(id, "bbox", "bbox is not the tight box of the mask"));
        }
        Ok(())
    }
}

impl<T: Real> Localized<T> for LesionAnnotation<T> {
    fn bbox(&self) -> Option<&BBox<T>> {
        Some(&self.bbox)
    }

    fn mask(&self) -> Option<&RasterMask> {
        Some(&self.mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct ImageRecord<T: Real = f64> {
    pub image_id: String,
    pub height: u32,
    pub width: u32,
    pub flags: Vec<ExclusionFlag>,
    pub birads_assessment: String,
    pub lesions: Vec<LesionAnnotation<T>>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl<T: Real> ImageRecord<T> {
    pub fn validate(&self) -> Result<(), CohortError> {
        if self.height == 0 || self.width == 0 {
            return Err(CohortError::invalid(&self.image_id, "height", "image dimensions must be positive"));
        }
        let mut ids = HashSet::new();
        for lesion in &self.lesions {
            if !ids.insert(lesion.lesion_id.as_str()) {
                return Err(CohortError::invalid(&lesion.lesion_id, "lesion_id", "duplicate lesion id"));
            }
            lesion.validate(self)?;
        }
        Ok(())
    }

    /// First flag in precedence order, if the image is flagged at all.
    pub fn exclusion_reason(&self) -> Option<ExclusionFlag> {
        ExclusionFlag::PRECEDENCE.into_iter().find(|f| self.flags.contains(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct WomanRecord<T: Real = f64> {
    pub woman_id: String,
    pub group_id: String,
    pub is_case: bool,
    pub birth_year: i32,
    pub manufacturer: Manufacturer,
    pub images: Vec<ImageRecord<T>>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

/// A whole cohort, one woman per line on disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort<T: Real = f64> {
    pub women: Vec<WomanRecord<T>>,
}

impl<T: Real> Cohort<T> {
    pub fn new(women: Vec<WomanRecord<T>>) -> Self {
        Cohort { women }
    }

    pub fn validate(&self) -> Result<(), CohortError> {
        let mut women = HashSet::new();
        let mut images = HashSet::new();
        for w in &self.women {
            if !women.insert(w.woman_id.as_str()) {
                return Err(CohortError::invalid(&w.woman_id, "woman_id", "duplicate woman id"));
            }
            for img in &w.images {
                if !images.insert(img.image_id.as_str()) {
                    return Err(CohortError::invalid(&img.image_id, "image_id", "duplicate image id"));
                }
                img.validate()?;
            }
        }
        Ok(())
    }

    pub fn images(&self) -> impl Iterator<Item = (&WomanRecord<T>, &ImageRecord<T>)> {
        self.women.iter().flat_map(|w| w.images.iter().map(move |i| (w, i)))
    }

    pub fn n_images(&self) -> usize {
        self.women.iter().map(|w| w.images.len()).sum()
    }

    pub fn n_lesions(&self) -> usize {
        self.images().map(|(_, i)| i.lesions.len()).sum()
    }
}

/// One predicted lesion from the upstream detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawDetection<T>",
    bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize")
)]
pub struct Detection<T: Real = f64> {
    pub image_id: String,
    pub bbox: BBox<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RasterMask>,
    pub score: T,
    pub concept_logits: ConceptLogits<T>,
    pub side_features: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cancer_prob: Option<T>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

/// Wire form; accepts pseudo-probabilities in place of logits.
#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
struct RawDetection<T: Real> {
    image_id: String,
    bbox: BBox<T>,
    #[serde(default)]
    mask: Option<RasterMask>,
    score: T,
    #[serde(default)]
    concept_logits: Option<Vec<T>>,
    #[serde(default)]
    concept_probabilities: Option<Vec<T>>,
    side_features: Vec<T>,
    #[serde(default)]
    cancer_prob: Option<T>,
    #[serde(flatten)]
    extra: ExtraFields,
}

fn in_unit<T: Real>(v: T) -> bool {
    v >= T::zero() && v <= T::one()
}

impl<T: Real> TryFrom<RawDetection<T>> for Detection<T> {
    type Error = String;

    fn try_from(raw: RawDetection<T>) -> Result<Self, Self::Error> {
        let concept_logits = match (raw.concept_logits, raw.concept_probabilities) {
            (Some(l), None) => ConceptLogits::from_slice(&l).map_err(|e| format!("concept_logits: {e}"))?,
            (None, Some(p)) => {
                let arr: [T; 5] = p
                    .as_slice()
                    .try_into()
                    .map_err(|_| format!("concept_probabilities: expected 5 values, got {}", p.len()))?;
                if arr.iter().any(|v| !(*v > T::zero() && *v < T::one())) {
                    return Err("concept_probabilities must lie strictly inside (0, 1)".into());
                }
                ConceptLogits::from_probabilities(arr).map_err(|e| format!("concept_probabilities: {e}"))?
            }
            (Some(_), Some(_)) => return Err("give concept_logits or concept_probabilities, not both".into()),
            (None, None) => return Err("missing field `concept_logits`".into()),
        };
        if !in_unit(raw.score) {
            return Err(format!("score {} outside [0, 1]", raw.score));
        }
        if let Some(p) = raw.cancer_prob {
            if !in_unit(p) {
                return Err(format!("cancer_prob {p} outside [0, 1]"));
            }
        }
        if raw.side_features.iter().any(|v| !v.is_finite()) {
            return Err("side_features must be finite".into());
        }
        Ok(Detection {
            image_id: raw.image_id,
            bbox: raw.bbox,
            mask: raw.mask,
            score: raw.score,
            concept_logits,
            side_features: raw.side_features,
            cancer_prob: raw.cancer_prob,
            extra: raw.extra,
        })
    }
}

impl<T: Real> Localized<T> for Detection<T> {
    fn bbox(&self) -> Option<&BBox<T>> {
        Some(&self.bbox)
    }

    fn mask(&self) -> Option<&RasterMask> {
        self.mask.as_ref()
    }
}
