use serde::Serialize;

use super::{Manufacturer, WomanRecord};
use crate::real::Real;

/// The matching-relevant attributes of one woman.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchCandidate {
    pub woman_id: String,
    pub birth_year: i32,
    pub manufacturer: Manufacturer,
}

impl<T: Real> From<&WomanRecord<T>> for MatchCandidate {
    fn from(w: &WomanRecord<T>) -> Self {
        MatchCandidate { woman_id: w.woman_id.clone(), birth_year: w.birth_year, manufacturer: w.manufacturer }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseControlGroup {
    pub case_id: String,
    pub control_ids: Vec<String>,
}

impl CaseControlGroup {
    pub fn is_complete(&self, ratio: usize) -> bool {
        self.control_ids.len() == ratio
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingReport {
    pub ratio: usize,
    pub year_tolerance: i32,
    pub complete_groups: usize,
    pub incomplete_groups: usize,
    /// Cases that found no eligible control at all.
    pub unmatched_cases: Vec<String>,
    pub unused_controls: Vec<String>,
}

/// Greedy 1:`ratio` matching on manufacturer and birth year.
///
/// Cases are visited in id order; each claims up to `ratio` unclaimed
/// controls with the same manufacturer and `|year difference| <=
/// year_tolerance`, nearest year first, lower id on ties.
pub fn match_case_controls(
    cases: &[MatchCandidate],
    controls: &[MatchCandidate],
    ratio: usize,
    year_tolerance: i32,
) -> (Vec<CaseControlGroup>, MatchingReport) {
    let mut case_order: Vec<&MatchCandidate> = cases.iter().collect();
    case_order.sort_by(|a, b| a.woman_id.cmp(&b.woman_id));
    let mut claimed = vec![false; controls.len()];
    let mut groups = Vec::with_capacity(cases.len());

    for case in case_order {
        let mut eligible: Vec<usize> = (0..controls.len())
            .filter(|&j| {
                !claimed[j]
                    && controls[j].manufacturer == case.manufacturer
                    && (controls[j].birth_year - case.birth_year).abs() <= year_tolerance
            })
            .collect();
        eligible.sort_by(|&a, &b| {
            let da = (controls[a].birth_year - case.birth_year).abs();
            let db = (controls[b].birth_year - case.birth_year).abs();
            da.cmp(&db).then_with(|| controls[a].woman_id.cmp(&controls[b].woman_id))
        });
        eligible.truncate(ratio);
        for &j in &eligible {
            claimed[j] = true;
        }
        groups.push(CaseControlGroup {
            case_id: case.woman_id.clone(),
            control_ids: eligible.iter().map(|&j| controls[j].woman_id.clone()).collect(),
        });
    }

    let complete = groups.iter().filter(|g| g.is_complete(ratio)).count();
    let mut unused: Vec<String> =
        (0..controls.len()).filter(|&j| !claimed[j]).map(|j| controls[j].woman_id.clone()).collect();
    unused.sort();
    let report = MatchingReport {
        ratio,
        year_tolerance,
        complete_groups: complete,
        incomplete_groups: groups.len() - complete,
        unmatched_cases: groups.iter().filter(|g| g.control_ids.is_empty()).map(|g| g.case_id.clone()).collect(),
        unused_controls: unused,
    };
    (groups, report)
}
