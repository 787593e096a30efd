//! Data ingestion, exclusion pipeline, case-control matching, group-atomic
//! splits and the synthetic cohort generator.

mod exclusion;
mod io;
mod matching;
mod model;
mod simulate;
mod split;

use thiserror::Error;

pub use exclusion::{apply_exclusions, ExclusionReport};
pub use io::{
    parse_cohort, parse_detections, read_cohort, read_detections, read_split, render_cohort, render_detections,
    write_cohort, write_detections, write_split,
};
pub use matching::{match_case_controls, CaseControlGroup, MatchCandidate, MatchingReport};
pub use model::{
    Cohort, Detection, ExclusionFlag, ExtraFields, ImageRecord, LesionAnnotation, Manufacturer, WomanRecord,
};
pub use simulate::{simulate_cohort, ConceptConditionals, OracleDescription, SimConfig, SimOutput};
pub use split::{split_groups, Split, SplitAssignment};

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("{record}: field `{field}`: {message}")]
    Invalid { record: String, field: &'static str, message: String },
    #[error("{source_name} line {line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("split: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CohortError {
    pub(crate) fn invalid(record: &str, field: &'static str, message: impl Into<String>) -> Self {
        CohortError::Invalid { record: record.to_string(), field, message: message.into() }
    }
}
