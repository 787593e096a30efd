use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use birads_cbm::cohort::{
    apply_exclusions, read_cohort, read_detections, read_split, render_cohort, render_detections, simulate_cohort,
    split_groups, Cohort, ExclusionReport, SimConfig, Split,
};
use birads_cbm::geometry::GeometryKind;
use birads_cbm::heads::{
    load_head, render_head, train, tune, HeadConfig, HeadVariant, SearchSpace, TrainRecord, TrainedHead, Trial,
};
use birads_cbm::intervention::{
    evaluate_with_correction, intervene_image, render_logs, score_detections, CorrectionReport, CorrectionStrategy,
};
use birads_cbm::metrics::{
    concurrence_tables, detection_report, matched_classification_auroc, AgreementTable, ApReport,
    ClassificationTarget, MatchedAuroc, UnmatchedPolicy, DEFAULT_CI_LEVEL,
};
use birads_cbm::pipeline::{concept_aurocs, training_records, ConceptSource, EvalImage, EvalSet};
use birads_cbm_service::{BundlePaths, SessionBundle};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::Recorder;
use crate::{CliError, Command, DataArgs, TrainData};

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, out, seed } => simulate(config.as_deref(), &out, seed),
        Command::Split { cohort, out, seed, fractions } => split(&cohort, &out, seed, &fractions),
        Command::Train { data, variant, config, seed, out } => {
            cmd_train(&data, variant.map(Into::into), config.as_deref(), seed, &out)
        }
        Command::Tune { data, variant, config, search, trials, seed, out } => {
            cmd_tune(&data, variant.map(Into::into), config.as_deref(), search.as_deref(), trials, seed, &out)
        }
        Command::EvalDetect { data, max_dets, out } => eval_detect(&data, max_dets, &out),
        Command::EvalConcepts { data, iou, out } => eval_concepts(&data, &iou, &out),
        Command::EvalCancer { data, head, iou, out } => eval_cancer(&data, &head, &iou, &out),
        Command::InterveneEval { data, head, strategy, iou, out } => {
            let strategies: Vec<CorrectionStrategy> = strategy.into_iter().map(Into::into).collect();
            intervene_eval(&data, &head, &strategies, &iou, &out)
        }
        Command::Kappa { reads_a, reads_b, iou, geometry, out } => kappa(&reads_a, &reads_b, iou, geometry.into(), &out),
        Command::Serve { data, head, oracle, host, port } => serve(&data, head, oracle, &host, port),
    }
}

/// Parses a TOML file into `T`, rejecting unknown keys by name.
fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message())))
}

fn check_ious(ious: &[f64]) -> Result<(), CliError> {
    if ious.is_empty() {
        return Err(CliError::input("at least one IoU threshold is required"));
    }
    match ious.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        Some(t) => Err(CliError::input(format!("IoU threshold {t} must lie in (0, 1]"))),
        None => Ok(()),
    }
}

fn load_kept_cohort(path: &Path, rec: &mut Recorder) -> Result<(Cohort, ExclusionReport), CliError> {
    rec.input(path);
    Ok(apply_exclusions(&read_cohort(path)?))
}

/// Kept images of the requested split, with their detections.
fn load_eval_set(data: &DataArgs, rec: &mut Recorder) -> Result<EvalSet, CliError> {
    let (cohort, _) = load_kept_cohort(&data.cohort, rec)?;
    let cohort = match &data.split {
        Some(p) => {
            rec.input(p);
            read_split(p)?.restrict(&cohort, data.subset.into())?
        }
        None => cohort,
    };
    rec.input(&data.detections);
    let detections = read_detections(&data.detections)?;
    Ok(EvalSet::build(&cohort, &detections))
}

fn load_heads(paths: &[PathBuf], rec: &mut Recorder) -> Result<Vec<TrainedHead>, CliError> {
    paths
        .iter()
        .map(|p| {
            rec.input(p);
            load_head(p).map_err(CliError::from)
        })
        .collect()
}

fn finish(rec: Recorder) -> Result<(), CliError> {
    let m = rec.finish()?;
    for o in &m.outputs {
        println!("wrote {} ({})", o.path, &o.sha256[..12]);
    }
    Ok(())
}

fn simulate(config: Option<&Path>, out: &Path, seed: u64) -> Result<(), CliError> {
    let mut rec = Recorder::new("simulate", out)?;
    let cfg: SimConfig = match config {
        Some(p) => {
            rec.input(p);
            read_toml(p)?
        }
        None => SimConfig::default(),
    };
    rec.config(&cfg);
    rec.seed("simulate", seed);
    let sim = simulate_cohort(&cfg, seed)?;
    rec.write("cohort.jsonl", &render_cohort(&sim.cohort))?;
    rec.write("detections.jsonl", &render_detections(&sim.detections))?;
    rec.write_json("oracle.json", &sim.oracle)?;
    println!(
        "{} women, {} images, {} lesions ({} malignant), {} detections; Bayes AUROC {:.4}",
        sim.cohort.women.len(),
        sim.cohort.n_images(),
        sim.oracle.n_lesions,
        sim.oracle.n_malignant_lesions,
        sim.detections.len(),
        sim.oracle.bayes_auroc
    );
    finish(rec)
}

fn split(cohort: &Path, out: &Path, seed: u64, fractions: &[f64]) -> Result<(), CliError> {
    let fractions: [f64; 3] = fractions
        .try_into()
        .map_err(|_| CliError::input(format!("--fractions needs 3 values, got {}", fractions.len())))?;
    let mut rec = Recorder::new("split", out)?;
    rec.config(&serde_json::json!({ "fractions": fractions }));
    rec.seed("split", seed);
    let (kept, report) = load_kept_cohort(cohort, &mut rec)?;
    let groups: Vec<String> = kept.women.iter().map(|w| w.group_id.clone()).collect();
    let assignment = split_groups(&groups, fractions, seed)?;
    rec.write_json("split.json", &assignment)?;
    rec.write_json("exclusions.json", &report)?;
    println!(
        "excluded {} of {} images; {} women dropped",
        report.images_excluded, report.images_in, report.women_dropped
    );
    for (flag, n) in &report.by_reason {
        if *n > 0 {
            println!("  {:<22} {n}", flag.name());
        }
    }
    for (s, n) in Split::ALL.iter().zip(assignment.counts) {
        println!("{:<5} {n} groups", s.name());
    }
    finish(rec)
}

struct TrainingData {
    train: Vec<TrainRecord>,
    val: Vec<TrainRecord>,
    side_dim: usize,
}

fn load_training_data(data: &TrainData, rec: &mut Recorder) -> Result<TrainingData, CliError> {
    if !(data.iou > 0.0 && data.iou <= 1.0) {
        return Err(CliError::input(format!("IoU threshold {} must lie in (0, 1]", data.iou)));
    }
    let (cohort, _) = load_kept_cohort(&data.cohort, rec)?;
    rec.input(&data.split);
    let assignment = read_split(&data.split)?;
    rec.input(&data.detections);
    let detections = read_detections(&data.detections)?;
    let kind: GeometryKind = data.geometry.into();
    let source: ConceptSource = data.concept_source.into();
    let records = |split: Split| -> Result<Vec<TrainRecord>, CliError> {
        let set = EvalSet::build(&assignment.restrict(&cohort, split)?, &detections);
        Ok(training_records(&set.views(), data.iou, kind, source)?)
    };
    let train = records(Split::Train)?;
    let val = records(Split::Val)?;
    let side_dim = train.first().map_or(0, |r| r.side_features.len());
    Ok(TrainingData { train, val, side_dim })
}

fn head_config(config: Option<&Path>, variant: Option<HeadVariant>, seed: u64, side_dim: usize, rec: &mut Recorder) -> Result<HeadConfig, CliError> {
    let mut cfg: HeadConfig = match config {
        Some(p) => {
            rec.input(p);
            read_toml(p)?
        }
        None => HeadConfig::default(),
    };
    if let Some(v) = variant {
        cfg.variant = v;
    }
    cfg.seed = seed;
    match cfg.variant {
        HeadVariant::NonlinearSide if cfg.side_feature_dim == 0 => cfg.side_feature_dim = side_dim,
        HeadVariant::NonlinearSide => {}
        _ => cfg.side_feature_dim = 0,
    }
    cfg.validate()?;
    Ok(cfg)
}

fn head_file_name(variant: HeadVariant) -> String {
    format!("head-{}.json", variant.name())
}

fn cmd_train(data: &TrainData, variant: Option<HeadVariant>, config: Option<&Path>, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut rec = Recorder::new("train", out)?;
    let td = load_training_data(data, &mut rec)?;
    let cfg = head_config(config, variant, seed, td.side_dim, &mut rec)?;
    rec.config(&serde_json::json!({
        "head": cfg,
        "match_iou": data.iou,
        "geometry": GeometryKind::from(data.geometry),
        "concept_source": ConceptSource::from(data.concept_source),
    }));
    rec.seed("train", seed);
    let outcome = train(&cfg, &td.train, &td.val)?;
    let head = TrainedHead::new(cfg.clone(), outcome.params.clone())?;
    rec.write(&head_file_name(cfg.variant), &render_head(&head))?;
    #[derive(Serialize)]
    struct TrainLog<'a> {
        variant: HeadVariant,
        n_train: usize,
        n_val: usize,
        best_epoch: usize,
        best_val_auroc: Option<f64>,
        epochs: &'a [birads_cbm::heads::EpochLog],
    }
    rec.write_json(
        "train_log.json",
        &TrainLog {
            variant: cfg.variant,
            n_train: td.train.len(),
            n_val: td.val.len(),
            best_epoch: outcome.best_epoch,
            best_val_auroc: outcome.best_val_auroc(),
            epochs: &outcome.log,
        },
    )?;
    println!(
        "{} head: {} train / {} val records; best epoch {} (val AUROC {})",
        cfg.variant,
        td.train.len(),
        td.val.len(),
        outcome.best_epoch,
        outcome.best_val_auroc().map_or("undefined".into(), |a| format!("{a:.4}"))
    );
    finish(rec)
}

fn cmd_tune(
    data: &TrainData,
    variant: Option<HeadVariant>,
    config: Option<&Path>,
    search: Option<&Path>,
    n_trials: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let mut rec = Recorder::new("tune", out)?;
    let td = load_training_data(data, &mut rec)?;
    let base = head_config(config, variant, seed, td.side_dim, &mut rec)?;
    let space: SearchSpace = match search {
        Some(p) => {
            rec.input(p);
            read_toml(p)?
        }
        None => SearchSpace::default(),
    };
    rec.config(&serde_json::json!({
        "base": base,
        "search": space,
        "trials": n_trials,
        "match_iou": data.iou,
        "geometry": GeometryKind::from(data.geometry),
        "concept_source": ConceptSource::from(data.concept_source),
    }));
    rec.seed("search", seed);
    rec.seed("train", base.seed);
    let outcome = tune(&base, &space, &td.train, &td.val, n_trials, seed)?;
    let head = TrainedHead::new(outcome.best_config.clone(), outcome.best.params.clone())?;
    rec.write(&head_file_name(base.variant), &render_head(&head))?;
    #[derive(Serialize)]
    struct TuneReport<'a> {
        variant: HeadVariant,
        best_trial: usize,
        best_config: &'a HeadConfig,
        trials: &'a [Trial],
    }
    rec.write_json(
        "trials.json",
        &TuneReport { variant: base.variant, best_trial: outcome.best_trial, best_config: &outcome.best_config, trials: &outcome.trials },
    )?;
    let t = &outcome.trials[outcome.best_trial];
    println!(
        "{} trials; best #{}: width {}, lr {:.3e}, momentum {:.3}, sigmoid {}, val AUROC {:.4}",
        outcome.trials.len(),
        t.trial,
        t.hidden_width,
        t.base_learning_rate,
        t.momentum,
        t.intermediate_sigmoid,
        t.val_auroc.unwrap_or(f64::NAN)
    );
    finish(rec)
}

fn eval_detect(data: &DataArgs, max_dets: usize, out: &Path) -> Result<(), CliError> {
    if max_dets == 0 {
        return Err(CliError::input("--max-dets must be positive"));
    }
    let mut rec = Recorder::new("eval-detect", out)?;
    rec.config(&serde_json::json!({ "max_dets": max_dets, "subset": data.split.as_ref().map(|_| Split::from(data.subset)) }));
    let set = load_eval_set(data, &mut rec)?;
    let report: ApReport = detection_report(&set.views(), max_dets)?;
    rec.write_json("detect_report.json", &report)?;
    println!("{:<5} {:>7} {:>7} {:>7}", "", "AP", "AP50", "AP75");
    for (name, s) in [("box", &report.bbox), ("mask", &report.mask)] {
        println!("{name:<5} {:>7.4} {:>7.4} {:>7.4}", s.ap, s.ap50, s.ap75);
    }
    finish(rec)
}

#[derive(Serialize)]
struct AurocReport<'a> {
    geometry: GeometryKind,
    level: f64,
    rows: &'a [MatchedAuroc],
}

fn print_auroc_rows(rows: &[MatchedAuroc], label: impl Fn(&MatchedAuroc) -> String) {
    for r in rows {
        println!(
            "{:<28} IoU {:.2}  AUROC {:.4} [{:.4}, {:.4}]  n={}",
            label(r),
            r.iou_threshold,
            r.estimate.auc,
            r.estimate.ci_low,
            r.estimate.ci_high,
            r.n_matched
        );
    }
}

fn eval_concepts(data: &DataArgs, ious: &[f64], out: &Path) -> Result<(), CliError> {
    check_ious(ious)?;
    let mut rec = Recorder::new("eval-concepts", out)?;
    let kind: GeometryKind = data.geometry.into();
    rec.config(&serde_json::json!({ "iou": ious, "geometry": kind, "level": DEFAULT_CI_LEVEL }));
    let set = load_eval_set(data, &mut rec)?;
    let rows = concept_aurocs(&set.views(), ious, kind, DEFAULT_CI_LEVEL)?;
    rec.write_json("concept_report.json", &AurocReport { geometry: kind, level: DEFAULT_CI_LEVEL, rows: &rows })?;
    print_auroc_rows(&rows, |r| r.target.name());
    finish(rec)
}

#[derive(Serialize)]
struct CancerRow {
    /// `None` when the detections' own cancer probabilities were scored.
    variant: Option<HeadVariant>,
    #[serde(flatten)]
    result: MatchedAuroc,
}

fn cancer_rows(images: &[EvalImage], variant: Option<HeadVariant>, ious: &[f64], kind: GeometryKind) -> Result<Vec<CancerRow>, CliError> {
    let views: Vec<_> = images
        .iter()
        .map(|e| birads_cbm::metrics::ImageEval { detections: &e.detections, ground_truths: &e.image.lesions })
        .collect();
    ious.iter()
        .map(|&t| {
            let result = matched_classification_auroc(&views, t, ClassificationTarget::Cancer, kind, UnmatchedPolicy::Exclude, DEFAULT_CI_LEVEL)?;
            Ok(CancerRow { variant, result })
        })
        .collect()
}

fn eval_cancer(data: &DataArgs, heads: &[PathBuf], ious: &[f64], out: &Path) -> Result<(), CliError> {
    check_ious(ious)?;
    let mut rec = Recorder::new("eval-cancer", out)?;
    let kind: GeometryKind = data.geometry.into();
    rec.config(&serde_json::json!({ "iou": ious, "geometry": kind, "level": DEFAULT_CI_LEVEL }));
    let set = load_eval_set(data, &mut rec)?;
    let heads = load_heads(heads, &mut rec)?;
    let mut rows = Vec::new();
    if heads.is_empty() {
        rows.extend(cancer_rows(&set.images, None, ious, kind)?);
    }
    for h in &heads {
        let scored = set
            .images
            .iter()
            .map(|e| Ok(EvalImage { detections: score_detections(h, &e.detections)?, ..e.clone() }))
            .collect::<Result<Vec<_>, CliError>>()?;
        rows.extend(cancer_rows(&scored, Some(h.variant()), ious, kind)?);
    }
    #[derive(Serialize)]
    struct Report<'a> {
        geometry: GeometryKind,
        level: f64,
        rows: &'a [CancerRow],
    }
    rec.write_json("cancer_report.json", &Report { geometry: kind, level: DEFAULT_CI_LEVEL, rows: &rows })?;
    for r in &rows {
        print_auroc_rows(std::slice::from_ref(&r.result), |_| r.variant.map_or("detections".into(), |v| v.to_string()));
    }
    finish(rec)
}

fn intervene_eval(data: &DataArgs, heads: &[PathBuf], strategies: &[CorrectionStrategy], ious: &[f64], out: &Path) -> Result<(), CliError> {
    check_ious(ious)?;
    if strategies.is_empty() {
        return Err(CliError::input("at least one strategy is required"));
    }
    let mut rec = Recorder::new("intervene-eval", out)?;
    let kind: GeometryKind = data.geometry.into();
    rec.config(&serde_json::json!({ "iou": ious, "strategies": strategies, "geometry": kind, "level": DEFAULT_CI_LEVEL }));
    let set = load_eval_set(data, &mut rec)?;
    let heads = load_heads(heads, &mut rec)?;
    let head_refs: Vec<&TrainedHead> = heads.iter().collect();
    let views = set.views();
    let report: CorrectionReport = evaluate_with_correction(&views, &head_refs, strategies, ious, kind, DEFAULT_CI_LEVEL)?;
    rec.write_json("intervention_report.json", &report)?;
    let mut logs = Vec::new();
    for &s in strategies {
        for v in &views {
            logs.extend(intervene_image(v.detections, v.ground_truths, s, kind)?.1);
        }
    }
    rec.write("intervention_logs.jsonl", &render_logs(&logs))?;
    println!("{:<15} {:<8} {:>5} {:>8} {:>19}", "head", "strategy", "IoU", "AUROC", "95% CI");
    for r in &report.rows {
        println!(
            "{:<15} {:<8} {:>5.2} {:>8.4}   [{:.4}, {:.4}]",
            r.variant.to_string(),
            r.strategy.name(),
            r.iou_threshold,
            r.estimate.auc,
            r.estimate.ci_low,
            r.estimate.ci_high
        );
    }
    finish(rec)
}

#[derive(Serialize)]
struct KappaRow {
    property: String,
    kappa: Option<f64>,
    error: Option<String>,
    table: AgreementTable,
}

fn kappa(reads_a: &Path, reads_b: &Path, iou: f64, kind: GeometryKind, out: &Path) -> Result<(), CliError> {
    if !(iou > 0.0 && iou <= 1.0) {
        return Err(CliError::input(format!("IoU threshold {iou} must lie in (0, 1]")));
    }
    let mut rec = Recorder::new("kappa", out)?;
    rec.config(&serde_json::json!({ "iou_min": iou, "geometry": kind }));
    let mut images = |p: &Path| -> Result<Vec<_>, CliError> {
        rec.input(p);
        Ok(read_cohort(p)?.images().map(|(_, im)| im.clone()).collect())
    };
    let a = images(reads_a)?;
    let b = images(reads_b)?;
    let report = concurrence_tables(&a, &b, iou, kind)?;
    let tables = report.properties.iter().map(|(_, t)| t.clone()).chain(std::iter::once(report.lesion_existence.clone()));
    let rows: Vec<KappaRow> = report
        .kappas()
        .into_iter()
        .zip(tables)
        .map(|((property, k), table)| match k {
            Ok(v) => KappaRow { property, kappa: Some(v), error: None, table },
            Err(e) => KappaRow { property, kappa: None, error: Some(e.to_string()), table },
        })
        .collect();
    #[derive(Serialize)]
    struct Report<'a> {
        iou_min: f64,
        geometry: GeometryKind,
        n_images: usize,
        n_lesions_a: usize,
        n_lesions_b: usize,
        n_pairs: usize,
        properties: &'a [KappaRow],
    }
    rec.write_json(
        "kappa_report.json",
        &Report {
            iou_min: iou,
            geometry: kind,
            n_images: report.n_images,
            n_lesions_a: report.n_lesions_a,
            n_lesions_b: report.n_lesions_b,
            n_pairs: report.n_pairs,
            properties: &rows,
        },
    )?;
    println!("{} paired lesions over {} images", report.n_pairs, report.n_images);
    for r in &rows {
        match r.kappa {
            Some(k) => println!("{:<18} kappa {k:.4}", r.property),
            None => println!("{:<18} kappa undefined ({})", r.property, r.error.as_deref().unwrap_or("")),
        }
    }
    let undefined: Vec<&str> = rows.iter().filter(|r| r.kappa.is_none()).map(|r| r.property.as_str()).collect();
    finish(rec)?;
    if undefined.is_empty() {
        Ok(())
    } else {
        Err(CliError::undefined(format!("kappa undefined for {}", undefined.join(", "))))
    }
}

fn serve(data: &DataArgs, heads: Vec<PathBuf>, oracle: Option<PathBuf>, host: &str, port: u16) -> Result<(), CliError> {
    let paths = BundlePaths {
        cohort: data.cohort.clone(),
        detections: data.detections.clone(),
        split: data.split.clone(),
        subset: Some(data.subset.into()),
        heads,
        oracle,
    };
    let bundle = SessionBundle::load(&paths).map_err(|e| CliError::input(e.to_string()))?;
    let addr: SocketAddr =
        format!("{host}:{port}").parse().map_err(|e| CliError::input(format!("bad address {host}:{port}: {e}")))?;
    println!("serving {} images on http://{addr}", bundle.n_images());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::input(e.to_string()))?;
    rt.block_on(birads_cbm_service::serve(addr, bundle)).map_err(|e| CliError::input(format!("server: {e}")))
}
