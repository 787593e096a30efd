//! Lesion geometry: boxes, run-length masks, polygons, IoU and matching.

mod bbox;
mod mask;
mod matching;
mod polygon;

use thiserror::Error;

pub use bbox::{box_iou, BBox};
pub use mask::{mask_iou, RasterMask};
pub use matching::{
    match_greedy_one_to_one, match_max_iou, region_iou, score_order, GeometryKind, IouMatrix,
    Localized, MatchResult, MatchedPair,
};
pub use polygon::{rasterize, Polygon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box {0}")]
    InvalidBox(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("mask shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("{0} geometry missing")]
    MissingGeometry(&'static str),
    #[error("invalid IoU table: {0}")]
    InvalidIou(String),
    #[error("unknown geometry kind {0:?} (expected box or mask)")]
    UnknownGeometry(String),
}
