//! Cancer heads on top of the concept bottleneck.
//!
//! Three variants share one parameter container:
//!
//! - `linear`: `sigmoid(w . c + b)` on the five concept logits.
//! - `nonlinear`: one rectified hidden layer of `hidden_width`, then a
//!   sigmoid output.
//! - `nonlinear_side`: a side subnetwork (width 32, rectified) maps the
//!   auxiliary feature vector to one extra bottleneck node `s`; the
//!   nonlinear head then runs on `[c, s]`.
//!
//! With `intermediate_sigmoid` the concept logits are squashed before the
//! first layer. The side node is never squashed.

mod file;
mod network;
mod train;
mod tune;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::ConceptLogits;
use crate::real::Real;

pub use file::{load_head, parse_head, render_head, save_head, HeadFile, HEAD_FILE_FORMAT, HEAD_FILE_VERSION};
pub use network::{forward, gradient, head_logit, loss, predict, DenseLayer, HeadParams};
pub use train::{learning_rate, train, EpochLog, TrainOutcome};
pub use tune::{sample_configs, tune, SearchSpace, Trial, TuneOutcome};

/// Hidden widths admitted by the search space.
pub const HIDDEN_WIDTHS: [usize; 6] = [64, 128, 256, 512, 1024, 2048];
/// Width of the side subnetwork's hidden layer.
pub const SIDE_HIDDEN_WIDTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadVariant {
    #[default]
    Linear,
    Nonlinear,
    NonlinearSide,
}

impl HeadVariant {
    pub const ALL: [HeadVariant; 3] = [HeadVariant::Linear, HeadVariant::Nonlinear, HeadVariant::NonlinearSide];

    pub fn name(self) -> &'static str {
        match self {
            HeadVariant::Linear => "linear",
            HeadVariant::Nonlinear => "nonlinear",
            HeadVariant::NonlinearSide => "nonlinear_side",
        }
    }
}

impl std::fmt::Display for HeadVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadVariant {
    type Err = HeadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        HeadVariant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| HeadError::Config(format!("unknown head variant `{s}` (expected linear, nonlinear or nonlinear_side)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub variant: HeadVariant,
    pub hidden_width: usize,
    /// Squash concept logits to pseudo-probabilities before the first layer.
    pub intermediate_sigmoid: bool,
    pub side_feature_dim: usize,
    pub base_learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub warmup_steps: usize,
    /// Learning-rate multiplier at step 0 of the warmup ramp.
    pub warmup_factor: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            variant: HeadVariant::Linear,
            hidden_width: 512,
            intermediate_sigmoid: false,
            side_feature_dim: 0,
            base_learning_rate: 4e-4,
            momentum: 0.5,
            batch_size: 16,
            warmup_steps: 100,
            warmup_factor: 0.001,
            epochs: 20,
            seed: 0,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<(), HeadError> {
        let bad = |m: String| Err(HeadError::Config(m));
        if !HIDDEN_WIDTHS.contains(&self.hidden_width) {
            return bad(format!("hidden_width = {} must be one of {HIDDEN_WIDTHS:?}", self.hidden_width));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum = {} must lie in [0, 1)", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.base_learning_rate > 0.0 && self.base_learning_rate.is_finite()) {
            return bad(format!("base_learning_rate = {} must be positive and finite", self.base_learning_rate));
        }
        if !(0.0..=1.0).contains(&self.warmup_factor) {
            return bad(format!("warmup_factor = {} must lie in [0, 1]", self.warmup_factor));
        }
        if self.variant == HeadVariant::NonlinearSide && self.side_feature_dim == 0 {
            return bad("nonlinear_side needs side_feature_dim >= 1".into());
        }
        Ok(())
    }

    /// Number of bottleneck nodes fed to the first head layer.
    pub fn bottleneck_width(&self) -> usize {
        match self.variant {
            HeadVariant::NonlinearSide => 6,
            _ => 5,
        }
    }
}

/// One training or scoring example: bottleneck outputs and the cancer label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct TrainRecord<T: Real = f64> {
    pub concept_logits: ConceptLogits<T>,
    /// Only read by `nonlinear_side`; other variants ignore it.
    #[serde(default)]
    pub side_features: Vec<T>,
    pub cancer_label: bool,
    #[serde(default = "unit_weight")]
    pub weight: T,
}

fn unit_weight<T: Real>() -> T {
    T::one()
}

impl<T: Real> TrainRecord<T> {
    pub fn new(concept_logits: ConceptLogits<T>, side_features: Vec<T>, cancer_label: bool) -> Self {
        TrainRecord { concept_logits, side_features, cancer_label, weight: T::one() }
    }
}

/// A head's configuration together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead<T: Real = f64> {
    pub config: HeadConfig,
    pub params: HeadParams<T>,
}

impl<T: Real> TrainedHead<T> {
    pub fn new(config: HeadConfig, params: HeadParams<T>) -> Result<Self, HeadError> {
        config.validate()?;
        params.check(&config)?;
        Ok(TrainedHead { config, params })
    }

    pub fn forward(&self, concept_logits: &ConceptLogits<T>, side_features: &[T]) -> Result<T, HeadError> {
        network::forward_parts(&self.params, &self.config, concept_logits, side_features)
    }

    pub fn variant(&self) -> HeadVariant {
        self.config.variant
    }
}

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("invalid head config: {0}")]
    Config(String),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: String, expected: usize, got: usize },
    #[error("{0}")]
    InvalidRecord(String),
    #[error("training set is empty")]
    EmptyData,
    #[error("loss became non-finite ({value}) at epoch {epoch}, step {step}; lower the learning rate")]
    Diverged { epoch: usize, step: usize, value: f64 },
    #[error("tuning needs at least one trial")]
    NoTrials,
    #[error("no trial produced a defined validation AUROC")]
    NoValidTrial,
    #[error("head file: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
