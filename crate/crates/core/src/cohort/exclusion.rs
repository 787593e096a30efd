use serde::Serialize;

use super::{Cohort, ExclusionFlag};
use crate::real::Real;

/// Image counts removed per reason, in precedence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExclusionReport {
    pub images_in: usize,
    pub images_kept: usize,
    pub images_excluded: usize,
    pub by_reason: Vec<(ExclusionFlag, usize)>,
    pub women_in: usize,
    pub women_dropped: usize,
}

impl ExclusionReport {
    pub fn count(&self, flag: ExclusionFlag) -> usize {
        self.by_reason.iter().find(|(f, _)| *f == flag).map_or(0, |(_, n)| *n)
    }
}

/// Drops flagged images and women left without images.
///
/// Multi-flag images are counted once, under their first flag in
/// [`ExclusionFlag::PRECEDENCE`].
pub fn apply_exclusions<T: Real>(cohort: &Cohort<T>) -> (Cohort<T>, ExclusionReport) {
    let mut counts = [0usize; 9];
    let mut kept_women = Vec::with_capacity(cohort.women.len());
    let mut images_in = 0;
    let mut images_kept = 0;
    for woman in &cohort.women {
        let mut w = woman.clone();
        images_in += w.images.len();
        w.images.retain(|img| match img.exclusion_reason() {
            Some(flag) => {
                counts[flag as usize] += 1;
                false
            }
            None => true,
        });
        images_kept += w.images.len();
        if !w.images.is_empty() {
            kept_women.push(w);
        }
    }
    let report = ExclusionReport {
        images_in,
        images_kept,
        images_excluded: images_in - images_kept,
        by_reason: ExclusionFlag::PRECEDENCE.iter().map(|&f| (f, counts[f as usize])).collect(),
        women_in: cohort.women.len(),
        women_dropped: cohort.women.len() - kept_women.len(),
    };
    (Cohort::new(kept_women), report)
}
