use std::collections::BTreeMap;
use std::path::PathBuf;

use birads_cbm::cohort::{apply_exclusions, read_cohort, read_detections, read_split, OracleDescription, Split};
use birads_cbm::heads::{load_head, HeadVariant, TrainedHead};
use birads_cbm::pipeline::{EvalImage, EvalSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Cohort(#[from] birads_cbm::cohort::CohortError),
    #[error(transparent)]
    Head(#[from] birads_cbm::heads::HeadError),
    #[error("two heads loaded for variant {0}")]
    DuplicateVariant(HeadVariant),
    #[error("duplicate image id {0}")]
    DuplicateImage(String),
    #[error("oracle file {path}: {message}")]
    Oracle { path: String, message: String },
}

/// Everything the API serves; immutable once built.
#[derive(Debug, Clone)]
pub struct SessionBundle {
    images: BTreeMap<String, EvalImage>,
    heads: BTreeMap<HeadVariant, TrainedHead>,
    pub oracle: Option<OracleDescription>,
}

/// Files a bundle is loaded from.
#[derive(Debug, Clone, Default)]
pub struct BundlePaths {
    pub cohort: PathBuf,
    pub detections: PathBuf,
    /// Without a split every kept image is served.
    pub split: Option<PathBuf>,
    pub subset: Option<Split>,
    pub heads: Vec<PathBuf>,
    pub oracle: Option<PathBuf>,
}

impl SessionBundle {
    pub fn new(set: EvalSet, heads: Vec<TrainedHead>, oracle: Option<OracleDescription>) -> Result<Self, BundleError> {
        let mut images = BTreeMap::new();
        for e in set.images {
            let id = e.image.image_id.clone();
            if images.insert(id.clone(), e).is_some() {
                return Err(BundleError::DuplicateImage(id));
            }
        }
        let mut by_variant = BTreeMap::new();
        for h in heads {
            let v = h.variant();
            if by_variant.insert(v, h).is_some() {
                return Err(BundleError::DuplicateVariant(v));
            }
        }
        Ok(SessionBundle { images, heads: by_variant, oracle })
    }

    /// Reads the files, drops excluded images and keeps one split
    /// (test unless `subset` says otherwise).
    pub fn load(paths: &BundlePaths) -> Result<Self, BundleError> {
        let (cohort, _) = apply_exclusions(&read_cohort(&paths.cohort)?);
        let cohort = match &paths.split {
            Some(p) => read_split(p)?.restrict(&cohort, paths.subset.unwrap_or(Split::Test))?,
            None => cohort,
        };
        let detections = read_detections(&paths.detections)?;
        let heads = paths.heads.iter().map(|p| load_head(p)).collect::<Result<Vec<_>, _>>()?;
        let oracle = match &paths.oracle {
            Some(p) => {
                let err = |message: String| BundleError::Oracle { path: p.display().to_string(), message };
                let text = std::fs::read_to_string(p).map_err(|e| err(e.to_string()))?;
                Some(serde_json::from_str(&text).map_err(|e| err(e.to_string()))?)
            }
            None => None,
        };
        Self::new(EvalSet::build(&cohort, &detections), heads, oracle)
    }

    /// Images in ascending id order.
    pub fn images(&self) -> impl Iterator<Item = &EvalImage> {
        self.images.values()
    }

    pub fn image(&self, image_id: &str) -> Option<&EvalImage> {
        self.images.get(image_id)
    }

    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    pub fn heads(&self) -> impl Iterator<Item = &TrainedHead> {
        self.heads.values()
    }

    pub fn head(&self, variant: HeadVariant) -> Option<&TrainedHead> {
        self.heads.get(&variant)
    }
}
