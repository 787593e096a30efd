//! Detection to ground-truth association.

use serde::{Deserialize, Serialize};

use super::{BBox, GeometryError, RasterMask};
use crate::real::Real;

/// Which region representation IoU is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    #[serde(rename = "box")]
    Box,
    Mask,
}

impl GeometryKind {
    pub const BOTH: [GeometryKind; 2] = [GeometryKind::Box, GeometryKind::Mask];

    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Box => "box",
            GeometryKind::Mask => "mask",
        }
    }
}

impl std::str::FromStr for GeometryKind {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "box" | "bbox" => Ok(GeometryKind::Box),
            "mask" | "segm" => Ok(GeometryKind::Mask),
            _ => Err(GeometryError::UnknownGeometry(s.to_string())),
        }
    }
}

/// Anything carrying a box and/or a raster mask.
pub trait Localized<T: Real> {
    fn bbox(&self) -> Option<&BBox<T>>;
    fn mask(&self) -> Option<&RasterMask>;
}

impl<T: Real> Localized<T> for BBox<T> {
    fn bbox(&self) -> Option<&BBox<T>> {
        Some(self)
    }

    fn mask(&self) -> Option<&RasterMask> {
        None
    }
}

impl<T: Real> Localized<T> for RasterMask {
    fn bbox(&self) -> Option<&BBox<T>> {
        None
    }

    fn mask(&self) -> Option<&RasterMask> {
        Some(self)
    }
}

/// IoU between two localized items under `kind`.
pub fn region_iou<T: Real, A: Localized<T> + ?Sized, B: Localized<T> + ?Sized>(
    a: &A,
    b: &B,
    kind: GeometryKind,
) -> Result<T, GeometryError> {
    match kind {
        GeometryKind::Box => {
            let (Some(x), Some(y)) = (a.bbox(), b.bbox()) else {
                return Err(GeometryError::MissingGeometry("box"));
            };
            Ok(x.iou(y))
        }
        GeometryKind::Mask => {
            let (Some(x), Some(y)) = (a.mask(), b.mask()) else {
                return Err(GeometryError::MissingGeometry("mask"));
            };
            x.iou(y)
        }
    }
}

/// Dense detections x ground-truths IoU table.
#[derive(Debug, Clone, PartialEq)]
pub struct IouMatrix<T: Real = f64> {
    n_dets: usize,
    n_gts: usize,
    values: Vec<T>,
}

impl<T: Real> IouMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>, n_gts: usize) -> Result<Self, GeometryError> {
        let n_dets = rows.len();
        let mut values = Vec::with_capacity(n_dets * n_gts);
        for row in rows {
            if row.len() != n_gts {
                return Err(GeometryError::InvalidIou(format!(
                    "row of length {} in a matrix with {n_gts} columns",
                    row.len()
                )));
            }
            values.extend(row);
        }
        if values.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(GeometryError::InvalidIou("value outside [0, 1]".into()));
        }
        Ok(IouMatrix { n_dets, n_gts, values })
    }

    pub fn compute<D, G>(dets: &[D], gts: &[G], kind: GeometryKind) -> Result<Self, GeometryError>
    where
        D: Localized<T>,
        G: Localized<T>,
    {
        let mut values = Vec::with_capacity(dets.len() * gts.len());
        for d in dets {
            for g in gts {
                values.push(region_iou(d, g, kind)?);
            }
        }
        Ok(IouMatrix { n_dets: dets.len(), n_gts: gts.len(), values })
    }

    pub fn n_dets(&self) -> usize {
        self.n_dets
    }

    pub fn n_gts(&self) -> usize {
        self.n_gts
    }

    pub fn get(&self, det: usize, gt: usize) -> T {
        self.values[det * self.n_gts + gt]
    }

    pub fn row(&self, det: usize) -> &[T] {
        &self.values[det * self.n_gts..(det + 1) * self.n_gts]
    }

    /// Keeps only the listed detection rows, in the given order.
    pub fn select_rows(&self, dets: &[usize]) -> Self {
        let values = dets.iter().flat_map(|&d| self.row(d).iter().copied()).collect();
        IouMatrix { n_dets: dets.len(), n_gts: self.n_gts, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair<T: Real = f64> {
    pub det: usize,
    pub gt: usize,
    pub iou: T,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchResult<T: Real = f64> {
    /// Sorted by detection index.
    pub pairs: Vec<MatchedPair<T>>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_ground_truths: Vec<usize>,
}

impl<T: Real> MatchResult<T> {
    /// Ground truth paired with `det`, if any.
    pub fn gt_for(&self, det: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.det == det).map(|p| p.gt)
    }

    fn finish(mut pairs: Vec<MatchedPair<T>>, n_dets: usize, n_gts: usize) -> Self {
        pairs.sort_by_key(|p| p.det);
        let mut det_used = vec![false; n_dets];
        let mut gt_used = vec![false; n_gts];
        for p in &pairs {
            det_used[p.det] = true;
            gt_used[p.gt] = true;
        }
        let unused = |used: Vec<bool>| used.iter().enumerate().filter(|(_, u)| !**u).map(|(i, _)| i).collect();
        MatchResult {
            pairs,
            unmatched_detections: unused(det_used),
            unmatched_ground_truths: unused(gt_used),
        }
    }
}

/// Index of the largest positive value, lowest index on ties.
fn argmax_positive<T: Real>(row: &[T], allowed: impl Fn(usize) -> bool) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (j, &v) in row.iter().enumerate() {
        if v > T::zero() && allowed(j) && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best
}

/// Pairs every detection with its maximal-IoU ground truth.
///
/// Several detections may share one ground truth. Detections overlapping
/// no ground truth stay unmatched; IoU ties go to the lowest index.
pub fn match_max_iou<T: Real>(ious: &IouMatrix<T>) -> MatchResult<T> {
    let pairs = (0..ious.n_dets())
        .filter_map(|det| argmax_positive(ious.row(det), |_| true).map(|(gt, iou)| MatchedPair { det, gt, iou }))
        .collect();
    MatchResult::finish(pairs, ious.n_dets(), ious.n_gts())
}

/// Detection order by descending score; ties keep input order.
pub fn score_order<T: Real>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Score-descending greedy one-to-one matching.
///
/// Each detection claims the highest-IoU unclaimed ground truth whose IoU
/// reaches `threshold`.
pub fn match_greedy_one_to_one<T: Real>(ious: &IouMatrix<T>, scores: &[T], threshold: T) -> MatchResult<T> {
    assert_eq!(scores.len(), ious.n_dets(), "one score per detection");
    let mut claimed = vec![false; ious.n_gts()];
    let mut pairs = Vec::new();
    for det in score_order(scores) {
        let row = ious.row(det);
        let hit = argmax_positive(row, |j| !claimed[j] && row[j] >= threshold);
        if let Some((gt, iou)) = hit {
            claimed[gt] = true;
            pairs.push(MatchedPair { det, gt, iou });
        }
    }
    MatchResult::finish(pairs, ious.n_dets(), ious.n_gts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> IouMatrix<f64> {
        let n = rows.first().map_or(0, |r| r.len());
        IouMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect(), n).unwrap()
    }

    #[test]
    fn max_iou_examples() {
        let r = match_max_iou(&m(&[&[1.0]]));
        assert_eq!(r.pairs, vec![MatchedPair { det: 0, gt: 0, iou: 1.0 }]);

        let r = match_max_iou(&m(&[&[0.0, 0.0]]));
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_detections, vec![0]);
        assert_eq!(r.unmatched_ground_truths, vec![0, 1]);

        let r = match_max_iou(&m(&[&[0.4, 0.4]]));
        assert_eq!(r.gt_for(0), Some(0));
    }

    #[test]
    fn max_iou_allows_sharing() {
        let r = match_max_iou(&m(&[&[0.5, 0.1], &[0.7, 0.2]]));
        assert_eq!(r.gt_for(0), Some(0));
        assert_eq!(r.gt_for(1), Some(0));
        assert_eq!(r.unmatched_ground_truths, vec![1]);
    }

    #[test]
    fn greedy_examples() {
        let r = match_greedy_one_to_one(&m(&[&[0.6], &[0.9]]), &[0.9, 0.8], 0.5);
        assert_eq!(r.gt_for(0), Some(0));
        assert_eq!(r.unmatched_detections, vec![1]);

        let r = match_greedy_one_to_one(&m(&[&[0.6]]), &[0.9], 0.75);
        assert!(r.pairs.is_empty());

        // det0 (0.9) takes GT1 (0.9 > 0.6); det1 falls back to GT0 (0.8).
        let r = match_greedy_one_to_one(&m(&[&[0.6, 0.9], &[0.8, 0.85]]), &[0.9, 0.8], 0.5);
        assert_eq!(r.gt_for(0), Some(1));
        assert_eq!(r.gt_for(1), Some(0));
    }

    #[test]
    fn greedy_score_ties_keep_input_order() {
        let r = match_greedy_one_to_one(&m(&[&[0.6], &[0.9]]), &[0.5, 0.5], 0.5);
        assert_eq!(r.gt_for(0), Some(0));
        assert_eq!(r.gt_for(1), None);
    }

    #[test]
    fn missing_geometry_is_error() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let e = region_iou::<f64, _, _>(&b, &b, GeometryKind::Mask);
        assert!(matches!(e, Err(GeometryError::MissingGeometry("mask"))));
    }

    fn arb_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
        (0usize..6, 0usize..5).prop_flat_map(|(nd, ng)| {
            let cell = prop_oneof![Just(0.0), Just(0.5), (0.0f64..=1.0)];
            (prop::collection::vec(prop::collection::vec(cell, ng), nd), Just(ng))
        })
    }

    proptest! {
        #[test]
        fn max_iou_independent_of_detection_order((rows, ng) in arb_matrix(), seed in any::<u64>()) {
            let mut perm: Vec<usize> = (0..rows.len()).collect();
            perm.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
            let a = match_max_iou(&IouMatrix::from_rows(rows.clone(), ng).unwrap());
            let permuted: Vec<_> = perm.iter().map(|&i| rows[i].clone()).collect();
            let b = match_max_iou(&IouMatrix::from_rows(permuted, ng).unwrap());
            for (new_idx, &old_idx) in perm.iter().enumerate() {
                prop_assert_eq!(a.gt_for(old_idx), b.gt_for(new_idx));
            }
        }

        #[test]
        fn greedy_never_below_threshold(
            (rows, ng) in arb_matrix(),
            t in 0.05f64..1.0,
            scores_seed in any::<u64>(),
        ) {
            let scores: Vec<f64> = (0..rows.len()).map(|i| ((scores_seed >> (i * 3)) & 7) as f64 / 8.0).collect();
            let r = match_greedy_one_to_one(&IouMatrix::from_rows(rows.clone(), ng).unwrap(), &scores, t);
            let mut seen = std::collections::HashSet::new();
            for p in &r.pairs {
                prop_assert!(p.iou >= t && p.iou > 0.0);
                prop_assert_eq!(p.iou, rows[p.det][p.gt]);
                prop_assert!(seen.insert(p.gt));
            }
            prop_assert_eq!(r.pairs.len() + r.unmatched_detections.len(), rows.len());
            prop_assert_eq!(r.pairs.len() + r.unmatched_ground_truths.len(), ng);
        }
    }
}
