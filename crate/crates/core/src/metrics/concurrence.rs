//! Inter-observer agreement on binarized lexicon properties.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{cohens_kappa, AgreementTable, MetricsError};
use crate::cohort::ImageRecord;
use crate::geometry::{region_iou, GeometryKind};
use crate::lexicon::Concept;
use crate::real::Real;

/// Default minimum IoU for two delineations to describe the same lesion.
pub const DEFAULT_CONCURRENCE_IOU: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcurrenceReport {
    pub iou_min: f64,
    pub n_images: usize,
    pub n_lesions_a: usize,
    pub n_lesions_b: usize,
    pub n_pairs: usize,
    /// 2x2 tables (index 0 benign-indicative, 1 malignancy-indicative).
    pub properties: Vec<(Concept, AgreementTable)>,
    /// Image-level any-lesion vs none.
    pub lesion_existence: AgreementTable,
}

impl ConcurrenceReport {
    pub fn property(&self, concept: Concept) -> &AgreementTable {
        &self.properties[concept.index()].1
    }

    /// Kappa per property followed by lesion existence.
    pub fn kappas(&self) -> Vec<(String, Result<f64, MetricsError>)> {
        self.properties
            .iter()
            .map(|(c, t)| (c.name().to_string(), cohens_kappa(t)))
            .chain(std::iter::once(("lesion_existence".to_string(), cohens_kappa(&self.lesion_existence))))
            .collect()
    }
}

/// One-to-one pairing by descending IoU among pairs reaching `iou_min`.
fn pair_lesions<T: Real>(
    a: &ImageRecord<T>,
    b: &ImageRecord<T>,
    iou_min: T,
    kind: GeometryKind,
) -> Result<Vec<(usize, usize)>, MetricsError> {
    let mut candidates = Vec::new();
    for (i, la) in a.lesions.iter().enumerate() {
        for (j, lb) in b.lesions.iter().enumerate() {
            let iou: T = region_iou(la, lb, kind)?;
            if iou > T::zero() && iou >= iou_min {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.lesions.len()];
    let mut used_b = vec![false; b.lesions.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    Ok(pairs)
}

/// Builds per-property agreement tables from two readers' annotations.
///
/// Images are joined on `image_id`; an image missing from one reader counts
/// as having no lesions for that reader.
pub fn concurrence_tables<T: Real>(
    reads_a: &[ImageRecord<T>],
    reads_b: &[ImageRecord<T>],
    iou_min: T,
    kind: GeometryKind,
) -> Result<ConcurrenceReport, MetricsError> {
    let by_id = |reads: &[ImageRecord<T>]| -> BTreeMap<String, ImageRecord<T>> {
        reads.iter().map(|r| (r.image_id.clone(), r.clone())).collect()
    };
    let (map_a, map_b) = (by_id(reads_a), by_id(reads_b));
    let ids: BTreeSet<&String> = map_a.keys().chain(map_b.keys()).collect();

    let mut properties: Vec<(Concept, AgreementTable)> =
        Concept::ALL.iter().map(|&c| (c, AgreementTable::zeros(2))).collect();
    let mut existence = AgreementTable::zeros(2);
    let mut n_pairs = 0;
    for id in &ids {
        let (a, b) = (map_a.get(*id), map_b.get(*id));
        let has_a = a.is_some_and(|r| !r.lesions.is_empty());
        let has_b = b.is_some_and(|r| !r.lesions.is_empty());
        existence.add(usize::from(has_a), usize::from(has_b));
        let (Some(a), Some(b)) = (a, b) else { continue };
        for (i, j) in pair_lesions(a, b, iou_min, kind)? {
            let (la, lb) = (a.lesions[i].labels(), b.lesions[j].labels());
            for (c, table) in properties.iter_mut() {
                table.add(usize::from(la.get(*c)), usize::from(lb.get(*c)));
            }
            n_pairs += 1;
        }
    }
    Ok(ConcurrenceReport {
        iou_min: iou_min.to_f64_lossy(),
        n_images: ids.len(),
        n_lesions_a: reads_a.iter().map(|r| r.lesions.len()).sum(),
        n_lesions_b: reads_b.iter().map(|r| r.lesions.len()).sum(),
        n_pairs,
        properties,
        lesion_existence: existence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{ExtraFields, LesionAnnotation};
    use crate::geometry::RasterMask;
    use crate::lexicon::{Margin, MassDescriptor};

    fn lesion(id: &str, rows: std::ops::Range<u32>, descriptor: MassDescriptor) -> LesionAnnotation {
        let px: Vec<bool> = (0..8u32).flat_map(|r| { let inside = rows.contains(&r); (0..8).map(move |c| inside && c < 4) }).collect();
        LesionAnnotation::from_mask(id, RasterMask::from_bitmap(8, 8, &px).unwrap(), descriptor, false).unwrap()
    }

    fn image(id: &str, lesions: Vec<LesionAnnotation>) -> ImageRecord {
        ImageRecord {
            image_id: id.into(),
            height: 8,
            width: 8,
            flags: vec![],
            birads_assessment: "3".into(),
            lesions,
            extra: ExtraFields::new(),
        }
    }

    fn fixture() -> Vec<ImageRecord> {
        let d = MassDescriptor::BENIGN;
        vec![
            image("I1", vec![lesion("a", 0..3, d)]),
            image("I2", vec![lesion("b", 2..6, d)]),
            image("I3", vec![lesion("c", 4..8, d)]),
        ]
    }

    #[test]
    fn identical_reads_are_diagonal() {
        let malignant = MassDescriptor::parse("irregular", "not parallel", "angular", "hypoechoic", "shadowing").unwrap();
        let mut reads = fixture();
        reads[1].lesions[0].descriptor = malignant;
        reads.push(image("I4", vec![]));
        let r = concurrence_tables(&reads, &reads, 0.25, GeometryKind::Mask).unwrap();
        assert_eq!(r.n_pairs, 3);
        for (c, table) in &r.properties {
            assert!(table.is_diagonal(), "{c}");
        }
        for (name, k) in r.kappas() {
            assert_eq!(k.unwrap(), 1.0, "{name}");
        }
    }

    #[test]
    fn flipped_margin_table() {
        let a = fixture();
        let mut b = fixture();
        b[1].lesions[0].descriptor.margin = Margin::Spiculated;
        let r = concurrence_tables(&a, &b, 0.25, GeometryKind::Mask).unwrap();
        // hand enumeration: two benign/benign pairs, one benign(A)/malignant(B)
        assert_eq!(r.property(Concept::Margin).rows(), vec![vec![2, 1], vec![0, 0]]);
        assert_eq!(r.property(Concept::Shape).rows(), vec![vec![3, 0], vec![0, 0]]);
    }

    #[test]
    fn reader_without_lesions() {
        let a = fixture();
        let b: Vec<_> = fixture().into_iter().map(|mut i| {
            i.lesions.clear();
            i
        }).collect();
        let r = concurrence_tables(&a, &b, 0.25, GeometryKind::Mask).unwrap();
        assert_eq!(r.n_pairs, 0);
        assert_eq!(r.property(Concept::Echo).total(), 0);
        assert!(matches!(cohens_kappa::<f64>(r.property(Concept::Echo)), Err(MetricsError::EmptyTable)));
        assert_eq!(r.lesion_existence.rows(), vec![vec![0, 0], vec![3, 0]]);
    }

    #[test]
    fn low_overlap_not_paired() {
        let d = MassDescriptor::BENIGN;
        let a = vec![image("I1", vec![lesion("a", 0..4, d)])];
        let b = vec![image("I1", vec![lesion("b", 3..8, d)])];
        // IoU = 4 / 32
        let r = concurrence_tables(&a, &b, 0.25, GeometryKind::Mask).unwrap();
        assert_eq!(r.n_pairs, 0);
        let r = concurrence_tables(&a, &b, 0.1, GeometryKind::Mask).unwrap();
        assert_eq!(r.n_pairs, 1);
    }
}
