use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::network::{DenseLayer, HeadParams};
use super::{HeadConfig, HeadError, TrainedHead};
use crate::real::Real;

pub const HEAD_FILE_FORMAT: &str = "birads-cbm-head";
pub const HEAD_FILE_VERSION: u32 = 1;

/// On-disk form of a trained head (pretty JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct HeadFile<T: Real = f64> {
    pub format: String,
    pub version: u32,
    pub config: HeadConfig,
    pub seed: u64,
    pub layers: Vec<DenseLayer<T>>,
}

pub fn render_head<T: Real + Serialize>(head: &TrainedHead<T>) -> String {
    let file = HeadFile {
        format: HEAD_FILE_FORMAT.into(),
        version: HEAD_FILE_VERSION,
        config: head.config.clone(),
        seed: head.config.seed,
        layers: head.params.layers.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("head serializes");
    s.push('\n');
    s
}

pub fn parse_head<T: Real + DeserializeOwned>(text: &str) -> Result<TrainedHead<T>, HeadError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: HeadFile<T> =
        serde_path_to_error::deserialize(de).map_err(|e| HeadError::File(format!("field {}: {}", e.path(), e.inner())))?;
    if file.format != HEAD_FILE_FORMAT {
        return Err(HeadError::File(format!("format `{}` is not `{HEAD_FILE_FORMAT}`", file.format)));
    }
    if file.version != HEAD_FILE_VERSION {
        return Err(HeadError::File(format!("unsupported version {} (expected {HEAD_FILE_VERSION})", file.version)));
    }
    if file.seed != file.config.seed {
        return Err(HeadError::File(format!("seed {} disagrees with config seed {}", file.seed, file.config.seed)));
    }
    let params = HeadParams { variant: file.config.variant, layers: file.layers };
    TrainedHead::new(file.config, params)
}

pub fn save_head<T: Real + Serialize>(path: &Path, head: &TrainedHead<T>) -> Result<(), HeadError> {
    std::fs::write(path, render_head(head))?;
    Ok(())
}

pub fn load_head<T: Real + DeserializeOwned>(path: &Path) -> Result<TrainedHead<T>, HeadError> {
    let text = std::fs::read_to_string(path)?;
    parse_head(&text).map_err(|e| match e {
        HeadError::File(m) => HeadError::File(format!("{}: {m}", path.display())),
        other => other,
    })
}
