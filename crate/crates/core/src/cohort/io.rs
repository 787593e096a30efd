//! Line-delimited JSON cohort and detection files.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Cohort, CohortError, Detection, SplitAssignment, WomanRecord};

fn parse_line<R: DeserializeOwned>(source_name: &str, line_no: usize, line: &str) -> Result<R, CohortError> {
    let err = |message: String| CohortError::Parse { source_name: source_name.to_string(), line: line_no, message };
    let mut de = serde_json::Deserializer::from_str(line);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            err(e.inner().to_string())
        } else {
            err(format!("field {path}: {}", e.inner()))
        }
    })?;
    de.end().map_err(|e| err(e.to_string()))?;
    Ok(value)
}

fn parse_lines<R: DeserializeOwned>(source_name: &str, text: impl BufRead) -> Result<Vec<(usize, R)>, CohortError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, parse_line(source_name, i + 1, &line)?));
    }
    Ok(out)
}

/// Parses and validates cohort lines (one woman per line).
pub fn parse_cohort(source_name: &str, text: impl BufRead) -> Result<Cohort, CohortError> {
    let rows: Vec<(usize, WomanRecord)> = parse_lines(source_name, text)?;
    let mut women = Vec::with_capacity(rows.len());
    for (line, woman) in rows {
        for img in &woman.images {
            img.validate().map_err(|e| CohortError::Parse {
                source_name: source_name.to_string(),
                line,
                message: format!("woman {}: image {}: {e}", woman.woman_id, img.image_id),
            })?;
        }
        women.push(woman);
    }
    let cohort = Cohort::new(women);
    cohort.validate()?;
    Ok(cohort)
}

pub fn parse_detections(source_name: &str, text: impl BufRead) -> Result<Vec<Detection>, CohortError> {
    Ok(parse_lines(source_name, text)?.into_iter().map(|(_, d)| d).collect())
}

pub fn read_cohort(path: &Path) -> Result<Cohort, CohortError> {
    let file = fs::File::open(path)?;
    parse_cohort(&path.display().to_string(), BufReader::new(file))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>, CohortError> {
    let file = fs::File::open(path)?;
    parse_detections(&path.display().to_string(), BufReader::new(file))
}

fn render_lines<R: Serialize>(rows: &[R]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn render_cohort(cohort: &Cohort) -> String {
    render_lines(&cohort.women)
}

pub fn render_detections(detections: &[Detection]) -> String {
    render_lines(detections)
}

pub fn write_cohort(path: &Path, cohort: &Cohort) -> Result<(), CohortError> {
    fs::File::create(path)?.write_all(render_cohort(cohort).as_bytes())?;
    Ok(())
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<(), CohortError> {
    fs::File::create(path)?.write_all(render_detections(detections).as_bytes())?;
    Ok(())
}

pub fn write_split(path: &Path, split: &SplitAssignment) -> Result<(), CohortError> {
    let mut text = serde_json::to_string_pretty(split).expect("split serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<SplitAssignment, CohortError> {
    let text = fs::read_to_string(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| CohortError::Parse {
        source_name: path.display().to_string(),
        line: e.inner().line(),
        message: format!("field {}: {}", e.path(), e.inner()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LESION: &str = r#"{"lesion_id":"L1","bbox":[1.0,1.0,3.0,2.0],"mask":{"height":4,"width":4,"runs":[5,2,9]},"shape":"oval","orientation":"parallel","margin":"circumscribed","echo_pattern":"anechoic","posterior":"none","malignant":false}"#;

    fn woman(lesion: &str) -> String {
        format!(
            r#"{{"woman_id":"W1","group_id":"G1","is_case":false,"birth_year":1970,"manufacturer":"philips","images":[{{"image_id":"I1","height":4,"width":4,"flags":[],"birads_assessment":"2","lesions":[{lesion}]}}]}}"#
        )
    }

    #[test]
    fn parses_and_roundtrips_with_unknown_fields() {
        let lesion = LESION.replace(r#""malignant":false"#, r#""malignant":false,"reader":"A""#);
        let text = woman(&lesion).replace(r#""birth_year":1970"#, r#""birth_year":1970,"site":{"x":1}"#);
        let cohort = parse_cohort("mem", text.as_bytes()).unwrap();
        assert_eq!(cohort.women[0].extra["site"]["x"], 1);
        assert_eq!(cohort.women[0].images[0].lesions[0].extra["reader"], "A");
        let rendered = render_cohort(&cohort);
        let again = parse_cohort("mem", rendered.as_bytes()).unwrap();
        assert_eq!(again, cohort);
        assert_eq!(render_cohort(&again), rendered);
    }

    #[test]
    fn missing_field_is_named() {
        let text = woman(LESION).replace(r#""birth_year":1970,"#, "");
        let err = parse_cohort("cohort.jsonl", text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("birth_year"), "{err}");
    }

    #[test]
    fn nested_field_error_has_path() {
        let text = woman(&LESION.replace(r#""margin":"circumscribed""#, r#""margin":"fuzzy""#));
        let err = parse_cohort("cohort.jsonl", format!("\n{text}").as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("margin") && err.contains("fuzzy"), "{err}");
    }

    #[test]
    fn lesion_outside_image_is_rejected() {
        let text = woman(&LESION.replace("[1.0,1.0,3.0,2.0]", "[1.0,1.0,5.0,2.0]"));
        let err = parse_cohort("c", text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("outside image bounds"), "{err}");
    }

    #[test]
    fn loose_bbox_is_rejected() {
        let text = woman(&LESION.replace("[1.0,1.0,3.0,2.0]", "[0.0,1.0,3.0,2.0]"));
        let err = parse_cohort("c", text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("tight box"), "{err}");
    }

    #[test]
    fn detections_accept_probabilities() {
        let line = r#"{"image_id":"I1","bbox":[0,0,1,1],"score":0.5,"concept_probabilities":[0.5,0.51,0.49,0.9,0.1],"side_features":[]}"#;
        let dets = parse_detections("d", line.as_bytes()).unwrap();
        let l = dets[0].concept_logits.values();
        assert_eq!(l[0], 0.0);
        assert!((l[1] - 0.040005334613699206).abs() < 1e-15);
        let rendered = render_detections(&dets);
        assert!(rendered.contains("concept_logits") && !rendered.contains("concept_probabilities"));
    }

    #[test]
    fn detection_validation() {
        let bad_score = r#"{"image_id":"I1","bbox":[0,0,1,1],"score":1.5,"concept_logits":[0,0,0,0,0],"side_features":[]}"#;
        assert!(parse_detections("d", bad_score.as_bytes()).unwrap_err().to_string().contains("score"));
        let short = r#"{"image_id":"I1","bbox":[0,0,1,1],"score":0.5,"concept_logits":[0,0,0,0],"side_features":[]}"#;
        assert!(parse_detections("d", short.as_bytes()).is_err());
        let missing = r#"{"image_id":"I1","bbox":[0,0,1,1],"score":0.5,"side_features":[]}"#;
        let err = parse_detections("d", missing.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("concept_logits"), "{err}");
    }
}
