//! Evaluation statistics: average precision, AUROC with DeLong intervals,
//! Cohen's kappa and the matched-detection classification protocols.

mod ap;
mod auroc;
mod classification;
mod concurrence;
mod kappa;

use thiserror::Error;

pub use ap::{
    average_precision, average_precision_from_ious, detection_report, iou_thresholds, ApReport, ApScores,
    ScoredImage, DEFAULT_MAX_DETS,
};
pub use auroc::{auroc, delong_ci, midranks, normal_quantile, AurocEstimate};
pub use classification::{
    matched_classification_auroc, matched_scores, ClassificationTarget, MatchedAuroc, UnmatchedPolicy,
};
pub use concurrence::{concurrence_tables, ConcurrenceReport, DEFAULT_CONCURRENCE_IOU};
pub use kappa::{cohens_kappa, AgreementTable};

use crate::cohort::{Detection, LesionAnnotation};
use crate::geometry::GeometryError;
use crate::real::Real;

/// Default confidence level for AUROC intervals.
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

/// Detections and ground truths of one image.
#[derive(Debug, Clone, Copy)]
pub struct ImageEval<'a, T: Real = f64> {
    pub detections: &'a [Detection<T>],
    pub ground_truths: &'a [LesionAnnotation<T>],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric undefined: population has {n_pos} positives and {n_neg} negatives")]
    SingleClass { n_pos: usize, n_neg: usize },
    #[error("DeLong variance needs at least 2 positives and 2 negatives (got {n_pos} and {n_neg})")]
    TooFewForVariance { n_pos: usize, n_neg: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFiniteScore(usize),
    #[error("confidence level {0} must lie in (0, 1)")]
    BadLevel(f64),
    #[error("average precision undefined without ground truths")]
    NoGroundTruth,
    #[error("agreement table is empty")]
    EmptyTable,
    #[error("agreement table must be square and non-empty")]
    NotSquare,
    #[error("kappa undefined: chance agreement is 1")]
    KappaUndefined,
    #[error("detection on image {0} has no cancer probability")]
    MissingCancerProb(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl MetricsError {
    /// True for errors caused by a degenerate population rather than bad input.
    pub fn is_undefined_metric(&self) -> bool {
        matches!(
            self,
            MetricsError::SingleClass { .. }
                | MetricsError::TooFewForVariance { .. }
                | MetricsError::NoGroundTruth
                | MetricsError::EmptyTable
                | MetricsError::KappaUndefined
        )
    }
}
