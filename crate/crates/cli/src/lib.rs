//! `birads-cbm` command line.
//!
//! Every command writes its machine-readable report and a `manifest.json`
//! into `--out`, and prints a human-readable summary. Exit codes: 0 on
//! success, 2 for invalid input or configuration, 3 when a metric is
//! undefined on the given population (for example a single-class set).

mod commands;
mod manifest;

use std::path::PathBuf;

use birads_cbm::cohort::Split;
use birads_cbm::geometry::GeometryKind;
use birads_cbm::heads::{HeadError, HeadVariant};
use birads_cbm::intervention::{CorrectionStrategy, InterventionError};
use birads_cbm::metrics::MetricsError;
use birads_cbm::pipeline::ConceptSource;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::{sha256_file, FileHash, RunManifest};

/// Seed used when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 20240501;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_UNDEFINED: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn undefined(message: impl Into<String>) -> Self {
        CliError { code: EXIT_UNDEFINED, message: message.into() }
    }
}

impl From<birads_cbm::cohort::CohortError> for CliError {
    fn from(e: birads_cbm::cohort::CohortError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<birads_cbm::geometry::GeometryError> for CliError {
    fn from(e: birads_cbm::geometry::GeometryError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        if e.is_undefined_metric() {
            CliError::undefined(e.to_string())
        } else {
            CliError::input(e.to_string())
        }
    }
}

impl From<HeadError> for CliError {
    fn from(e: HeadError) -> Self {
        match e {
            HeadError::NoValidTrial => CliError::undefined(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<InterventionError> for CliError {
    fn from(e: InterventionError) -> Self {
        match e {
            InterventionError::Metrics(m) => m.into(),
            InterventionError::Head(h) => h.into(),
            InterventionError::Geometry(g) => g.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "birads-cbm", version, about = "BI-RADS concept-bottleneck experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeometryArg {
    Box,
    Mask,
}

impl From<GeometryArg> for GeometryKind {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Box => GeometryKind::Box,
            GeometryArg::Mask => GeometryKind::Mask,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Linear,
    Nonlinear,
    NonlinearSide,
}

impl From<VariantArg> for HeadVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Linear => HeadVariant::Linear,
            VariantArg::Nonlinear => HeadVariant::Nonlinear,
            VariantArg::NonlinearSide => HeadVariant::NonlinearSide,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    None,
    Minimal,
    Maximal,
}

impl From<StrategyArg> for CorrectionStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::None => CorrectionStrategy::None,
            StrategyArg::Minimal => CorrectionStrategy::Minimal,
            StrategyArg::Maximal => CorrectionStrategy::Maximal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConceptSourceArg {
    Predicted,
    GroundTruth,
}

impl From<ConceptSourceArg> for ConceptSource {
    fn from(s: ConceptSourceArg) -> Self {
        match s {
            ConceptSourceArg::Predicted => ConceptSource::Predicted,
            ConceptSourceArg::GroundTruth => ConceptSource::GroundTruth,
        }
    }
}

/// Cohort and detections, optionally narrowed to one split.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    /// Split assignment written by `split`.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Split evaluated when `--split` is given.
    #[arg(long, value_enum, default_value = "test")]
    pub subset: SplitArg,
    #[arg(long, value_enum, default_value = "mask")]
    pub geometry: GeometryArg,
}

#[derive(Debug, Clone, Args)]
pub struct TrainData {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, value_enum, default_value = "mask")]
    pub geometry: GeometryArg,
    /// IoU at which detections are paired with ground truth.
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    #[arg(long, value_enum, default_value = "predicted")]
    pub concept_source: ConceptSourceArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort, detections and oracle.
    Simulate {
        /// TOML simulation config; defaults apply to omitted keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Apply exclusions and assign case-control groups to train/val/test.
    Split {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Train, val and test fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
        fractions: Vec<f64>,
    },
    /// Train one cancer head on the train split, selecting on val.
    Train {
        #[command(flatten)]
        data: TrainData,
        /// Overrides the config's variant (linear when neither is set).
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// TOML head config; omitted keys take the documented defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Initialization and shuffling seed; overrides the config's.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search for one head variant.
    Tune {
        #[command(flatten)]
        data: TrainData,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// TOML search space.
        #[arg(long)]
        search: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Box and mask AP, AP50, AP75.
    EvalDetect {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = birads_cbm::metrics::DEFAULT_MAX_DETS)]
        max_dets: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-concept AUROC of detector logits at IoU thresholds.
    EvalConcepts {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.75])]
        iou: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cancer AUROC of trained heads (or of the detections' own scores).
    EvalCancer {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        head: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.75])]
        iou: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cancer AUROC with and without concept correction.
    InterveneEval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, required = true)]
        head: Vec<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["none", "minimal", "maximal"])]
        strategy: Vec<StrategyArg>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.75])]
        iou: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cohen's kappa between two readers' annotations of the same images.
    Kappa {
        #[arg(long)]
        reads_a: PathBuf,
        #[arg(long)]
        reads_b: PathBuf,
        #[arg(long, default_value_t = birads_cbm::metrics::DEFAULT_CONCURRENCE_IOU)]
        iou: f64,
        #[arg(long, value_enum, default_value = "mask")]
        geometry: GeometryArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API over one split.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        head: Vec<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> u8 {
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
