use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use birads_cbm::cohort::{read_cohort, render_cohort, render_detections, Detection, ExtraFields};
use birads_cbm::lexicon::ConceptLogits;
use birads_cbm_cli::sha256_file;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_birads-cbm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_sim(dir: &Path) -> PathBuf {
    let cfg = dir.join("sim.toml");
    std::fs::write(&cfg, "n_women = 80\n").unwrap();
    let out = dir.join("sim");
    let o = run(&["simulate", "--config", p(&cfg), "--out", p(&out), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn default_simulation_matches_pinned_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let pinned = [
        ("cohort.jsonl", "6120759f4af658cecfcfcf3b31b8cfc7f698d39a69d3a15e978fd09a517594b4"),
        ("detections.jsonl", "8550dba114181383bf54d2d784c44f77f0886f15f45e5212ca55fa9362bce482"),
        ("oracle.json", "bf79a6dd841d38300a8e7f8fbe9ade47c94b4c85b2eba70286bf12ee0609e904"),
    ];
    for (name, hash) in pinned {
        assert_eq!(sha256_file(&dir.path().join(name)).unwrap(), hash, "{name}");
    }
    let m = json(dir.path().join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seeds"]["simulate"], birads_cbm_cli::DEFAULT_SEED);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    assert_eq!(m["config"]["n_women"], 1000);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = small_sim(a.path());
    let sb = small_sim(b.path());
    for name in ["cohort.jsonl", "detections.jsonl", "oracle.json"] {
        assert_eq!(sha256_file(&sa.join(name)).unwrap(), sha256_file(&sb.join(name)).unwrap());
    }
}

#[test]
fn bad_config_key_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_women = 10\nn_wombats = 3\n").unwrap();
    let o = run(&["simulate", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_wombats"));

    let o = run(&["simulate", "--out", p(dir.path()), "--seed", "nope"]);
    assert_eq!(code(&o), 2);
    let o = run(&["eval-detect", "--cohort", "/no/such/file", "--detections", "/no/such", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn ground_truth_detections_score_perfect_ap() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_sim(dir.path());
    let cohort = read_cohort(&sim.join("cohort.jsonl")).unwrap();
    let dets: Vec<Detection> = cohort
        .images()
        .flat_map(|(_, im)| {
            im.lesions.iter().map(|l| Detection {
                image_id: im.image_id.clone(),
                bbox: l.bbox,
                mask: Some(l.mask.clone()),
                score: 1.0,
                concept_logits: ConceptLogits::new([0.0; 5]).unwrap(),
                side_features: vec![],
                cancer_prob: None,
                extra: ExtraFields::new(),
            })
        })
        .collect();
    let det_path = dir.path().join("gt_dets.jsonl");
    std::fs::write(&det_path, render_detections(&dets)).unwrap();
    let out = dir.path().join("det");
    let o = run(&["eval-detect", "--cohort", p(&sim.join("cohort.jsonl")), "--detections", p(&det_path), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(out.join("detect_report.json"));
    for g in ["box", "mask"] {
        for k in ["ap", "ap50", "ap75"] {
            assert_eq!(r[g][k], 1.0, "{g} {k}");
        }
    }
}

#[test]
fn kappa_on_duplicate_reads_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_sim(dir.path());
    let copy = dir.path().join("copy.jsonl");
    std::fs::copy(sim.join("cohort.jsonl"), &copy).unwrap();
    let out = dir.path().join("k");
    let o = run(&["kappa", "--reads-a", p(&sim.join("cohort.jsonl")), "--reads-b", p(&copy), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(out.join("kappa_report.json"));
    let props = r["properties"].as_array().unwrap();
    assert_eq!(props.len(), 6);
    for row in props {
        assert_eq!(row["kappa"], 1.0, "{row}");
    }
}

#[test]
fn undefined_kappa_exits_3_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_sim(dir.path());
    let mut cohort = read_cohort(&sim.join("cohort.jsonl")).unwrap();
    for w in &mut cohort.women {
        for im in &mut w.images {
            im.lesions.clear();
        }
    }
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, render_cohort(&cohort)).unwrap();
    let out = dir.path().join("k");
    let o = run(&["kappa", "--reads-a", p(&empty), "--reads-b", p(&empty), "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    let r = json(out.join("kappa_report.json"));
    assert!(r["properties"].as_array().unwrap().iter().all(|row| row["kappa"].is_null()));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn single_class_auroc_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_sim(dir.path());
    let mut cohort = read_cohort(&sim.join("cohort.jsonl")).unwrap();
    for w in &mut cohort.women {
        for im in &mut w.images {
            for l in &mut im.lesions {
                l.malignant = false;
            }
        }
    }
    let benign = dir.path().join("benign.jsonl");
    std::fs::write(&benign, render_cohort(&cohort)).unwrap();
    let head = dir.path().join("head.json");
    let zero = birads_cbm::heads::HeadConfig::default();
    let h = birads_cbm::TrainedHead::new(zero.clone(), birads_cbm::HeadParams::zeros(&zero)).unwrap();
    birads_cbm::heads::save_head(&head, &h).unwrap();
    let o = run(&[
        "eval-cancer",
        "--cohort",
        p(&benign),
        "--detections",
        p(&sim.join("detections.jsonl")),
        "--head",
        p(&head),
        "--out",
        p(&dir.path().join("c")),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positives"));
}

#[test]
fn train_tune_and_evaluate_on_small_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("sim.toml");
    std::fs::write(&cfg, "n_women = 300\n").unwrap();
    let sim = d.join("sim");
    assert_eq!(code(&run(&["simulate", "--config", p(&cfg), "--out", p(&sim)])), 0);
    let cohort = sim.join("cohort.jsonl");
    let dets = sim.join("detections.jsonl");
    assert_eq!(code(&run(&["split", "--cohort", p(&cohort), "--out", p(&d.join("split"))])), 0);
    let split = d.join("split/split.json");
    let data = ["--cohort", p(&cohort), "--detections", p(&dets), "--split", p(&split)];

    let head_cfg = d.join("head.toml");
    std::fs::write(&head_cfg, "hidden_width = 64\nepochs = 3\nbase_learning_rate = 0.01\n").unwrap();
    let train_out = d.join("train");
    let mut args = vec!["train"];
    args.extend(data);
    args.extend(["--variant", "nonlinear-side", "--config", p(&head_cfg), "--out", p(&train_out)]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let head = train_out.join("head-nonlinear_side.json");
    let h: Value = json(head.clone());
    assert_eq!(h["config"]["side_feature_dim"], 4);
    assert_eq!(json(train_out.join("train_log.json"))["epochs"].as_array().unwrap().len(), 4);

    let tune_out = d.join("tune");
    let mut args = vec!["tune"];
    args.extend(data);
    args.extend(["--config", p(&head_cfg), "--trials", "3", "--out", p(&tune_out)]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(tune_out.join("trials.json"))["trials"].as_array().unwrap().len(), 3);
    assert!(tune_out.join("head-linear.json").exists());

    let ec = d.join("ec");
    let mut args = vec!["eval-cancer"];
    args.extend(data);
    args.extend(["--head", p(&head), "--iou", "0.5", "--out", p(&ec)]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json(ec.join("cancer_report.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["variant"], "nonlinear_side");

    let ie = d.join("ie");
    let mut args = vec!["intervene-eval"];
    args.extend(data);
    let linear = tune_out.join("head-linear.json");
    args.extend(["--head", p(&head), "--head", p(&linear), "--out", p(&ie)]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(ie.join("intervention_report.json"))["rows"].as_array().unwrap().len(), 2 * 3 * 2);
    let logs = std::fs::read_to_string(ie.join("intervention_logs.jsonl")).unwrap();
    assert!(logs.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}
