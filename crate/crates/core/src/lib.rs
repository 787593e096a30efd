//! BI-RADS concept-bottleneck toolkit: lexicon binarization, lesion
//! geometry, evaluation metrics, cancer heads, concept intervention and a
//! synthetic case-control cohort.
//!
//! Numeric code is generic over [`real::Real`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`; the `*F32` aliases fix it to `f32`.

pub mod cohort;
pub mod geometry;
pub mod heads;
pub mod intervention;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod real;

pub type BBox = geometry::BBox<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type ConceptLogits = lexicon::ConceptLogits<f64>;
pub type LesionAnnotation = cohort::LesionAnnotation<f64>;
pub type ImageRecord = cohort::ImageRecord<f64>;
pub type WomanRecord = cohort::WomanRecord<f64>;
pub type Cohort = cohort::Cohort<f64>;
pub type Detection = cohort::Detection<f64>;
pub type AurocEstimate = metrics::AurocEstimate<f64>;
pub type HeadParams = heads::HeadParams<f64>;
pub type TrainRecord = heads::TrainRecord<f64>;
pub type TrainedHead = heads::TrainedHead<f64>;
pub type EvalSet = pipeline::EvalSet<f64>;

pub type BBoxF32 = geometry::BBox<f32>;
pub type ConceptLogitsF32 = lexicon::ConceptLogits<f32>;
pub type DetectionF32 = cohort::Detection<f32>;
pub type CohortF32 = cohort::Cohort<f32>;
pub type HeadParamsF32 = heads::HeadParams<f32>;
pub type TrainRecordF32 = heads::TrainRecord<f32>;
pub type TrainedHeadF32 = heads::TrainedHead<f32>;
