use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn neofuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neofuse"))
        .args(args)
        .env_remove("NEOFUSE_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = neofuse(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{
  "cohort": { "n_patients": 4, "duration_s": 900, "seed": 11 },
  "experiment": { "k_values": [2], "runs": 1, "min_patients_per_subset": 1, "seed": 5 }
}"#,
    )
    .unwrap();
    path
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = neofuse(&["aggregate", "--scheme", "mv", "--pred", "p.csv", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_scheme_is_a_usage_error() {
    let out = neofuse(&["aggregate", "--scheme", "median", "--pred", "p.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere.csv");
    let out = neofuse(&["aggregate", "--scheme", "mean", "--pred", s(&missing), "--out", s(&tmp.path().join("c.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn help_documents_defaults() {
    for sub in [
        "filter-design",
        "segment",
        "train",
        "predict",
        "aggregate",
        "evaluate",
        "simulate",
        "report",
        "generate",
    ] {
        let out = ok(&[sub, "--help"]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out"), "{sub} help lacks --out");
    }
    let text = String::from_utf8_lossy(&ok(&["aggregate", "--help"]).stdout).into_owned();
    assert!(text.contains("[default: 0.00001]") || text.contains("[default: 1e-5]"), "{text}");
    assert!(text.contains("[default: 5000]"));
}

#[test]
fn filter_design_writes_sections_and_response() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("f");
    ok(&["filter-design", "--out", s(&dir), "--points", "129"]);
    let sos = fs::read_to_string(dir.join("sos.csv")).unwrap();
    assert_eq!(sos.lines().count(), 1 + 3);
    let resp = fs::read_to_string(dir.join("response.csv")).unwrap();
    assert_eq!(resp.lines().count(), 1 + 129);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["commands"]["filter-design"]["config"]["max_pole_magnitude"].as_f64().unwrap() < 1.0);
}

#[test]
fn output_root_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_neofuse"))
        .args(["filter-design"])
        .env("NEOFUSE_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("filter/sos.csv").exists());
}

const PREDICTIONS: &str = "segment_id,detector_id,probability
A:0,d1,0.9
A:0,d2,0.8
A:0,d3,0.2
A:4,d1,0.1
A:4,d2,0.3
A:4,d3,0.45
B:0,d1,0.6
B:0,d2,0.4
B:0,d3,0.7
B:4,d1,0.05
B:4,d2,0.9
B:4,d3,0.1
";

#[test]
fn aggregate_majority_vote_and_mean() {
    let tmp = TempDir::new().unwrap();
    let pred = tmp.path().join("p.csv");
    fs::write(&pred, PREDICTIONS).unwrap();
    let mv = tmp.path().join("mv.csv");
    ok(&["aggregate", "--scheme", "mv", "--pred", s(&pred), "--out", s(&mv)]);
    let rows: Vec<String> = fs::read_to_string(&mv).unwrap().lines().map(str::to_string).collect();
    assert_eq!(rows[0], "segment_id,score,label");
    let labels: Vec<&str> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(labels, ["1", "0", "1", "0"]);

    let mean = tmp.path().join("mean.csv");
    ok(&["aggregate", "--scheme", "mean", "--pred", s(&pred), "--out", s(&mean)]);
    let first: f64 = fs::read_to_string(&mean).unwrap().lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 1.9 / 3.0).abs() < 1e-12);
}

#[test]
fn aggregate_ds_per_patient_and_pooled() {
    let tmp = TempDir::new().unwrap();
    let pred = tmp.path().join("p.csv");
    fs::write(&pred, PREDICTIONS).unwrap();
    let out = tmp.path().join("ds/c.csv");
    ok(&["aggregate", "--scheme", "ds", "--pred", s(&pred), "--out", s(&out)]);
    let params: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ds/ds_params.json")).unwrap()).unwrap();
    assert_eq!(params["mode"], "per_patient");
    let groups = params["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0]["patient_id"], "A");
    assert_eq!(groups[0]["alpha"].as_array().unwrap().len(), 3);
    assert!(groups[0]["log_likelihood"].as_f64().unwrap().is_finite());

    let first = fs::read(&out).unwrap();
    ok(&["aggregate", "--scheme", "ds", "--pred", s(&pred), "--out", s(&out)]);
    assert_eq!(first, fs::read(&out).unwrap());

    ok(&["aggregate", "--scheme", "ds", "--pooled", "--pred", s(&pred), "--out", s(&out)]);
    let params: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ds/ds_params.json")).unwrap()).unwrap();
    assert_eq!(params["mode"], "pooled");
    assert_eq!(params["groups"].as_array().unwrap().len(), 1);
}

#[test]
fn wmean_requires_a_stacking_model() {
    let tmp = TempDir::new().unwrap();
    let pred = tmp.path().join("p.csv");
    fs::write(&pred, PREDICTIONS).unwrap();
    let out = neofuse(&["aggregate", "--scheme", "wmean", "--pred", s(&pred)]);
    assert_eq!(out.status.code(), Some(1));

    let model = tmp.path().join("stack.json");
    fs::write(
        &model,
        r#"{"detector_ids":["d3","d1"],"weights":[0.0,2.0],"intercept":-1.0,"holdout_detector":"d2"}"#,
    )
    .unwrap();
    let c = tmp.path().join("c.csv");
    ok(&["aggregate", "--scheme", "wmean", "--pred", s(&pred), "--stacking", s(&model), "--out", s(&c)]);
    let score: f64 = fs::read_to_string(&c).unwrap().lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((score - 1.0 / (1.0 + (-0.8f64).exp())).abs() < 1e-15);

    fs::write(&model, r#"{"detector_ids":["zz"],"weights":[1.0],"intercept":0.0,"holdout_detector":null}"#).unwrap();
    let out = neofuse(&["aggregate", "--scheme", "wmean", "--pred", s(&pred), "--stacking", s(&model), "--out", s(&c)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
}

#[test]
fn pipeline_from_recordings_to_metrics() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let config = small_config(t);
    let cohort = t.join("cohort");
    ok(&["generate", "--config", s(&config), "--patients", "3", "--out", s(&cohort)]);
    let ann = cohort.join("annotations.csv");
    let rec = |p: &str| cohort.join(format!("{p}.json"));

    let seg_dir = t.join("seg");
    ok(&["segment", "--recording", s(&rec("P03")), "--annotations", s(&ann), "--out", s(&seg_dir)]);
    let segs = fs::read_to_string(seg_dir.join("segments.csv")).unwrap();
    assert_eq!(segs.lines().count(), 1 + (900 - 16) / 4 + 1);

    let m1 = t.join("m/local0.json");
    let m2 = t.join("m/local1.json");
    ok(&["train", "--recording", s(&rec("P01")), "--annotations", s(&ann), "--id", "local0", "--epochs", "3", "--out", s(&m1)]);
    ok(&["train", "--recording", s(&rec("P02")), "--annotations", s(&ann), "--id", "local1", "--epochs", "3", "--seed", "1", "--out", s(&m2)]);

    let pred = t.join("pred/p.csv");
    ok(&["predict", "--model", s(&m1), "--model", s(&m2), "--recording", s(&rec("P03")), "--out", s(&pred)]);
    let lines = fs::read_to_string(&pred).unwrap().lines().count();
    assert!(lines > 1 && (lines - 1) % 2 == 0);

    let train_pred = t.join("pred/train.csv");
    ok(&["predict", "--model", s(&m1), "--recording", s(&rec("P02")), "--out", s(&train_pred)]);
    let stack = t.join("m/stack.json");
    ok(&["train", "--pred", s(&train_pred), "--annotations", s(&ann), "--out", s(&stack)]);
    let pred_m1 = t.join("pred/p1.csv");
    ok(&["predict", "--model", s(&m1), "--recording", s(&rec("P03")), "--out", s(&pred_m1)]);

    for scheme in ["mv", "mean", "ds"] {
        let c = t.join(format!("agg/{scheme}.csv"));
        ok(&["aggregate", "--scheme", scheme, "--pred", s(&pred), "--out", s(&c)]);
    }
    let wm = t.join("agg/wmean.csv");
    ok(&["aggregate", "--scheme", "wmean", "--pred", s(&pred_m1), "--stacking", s(&stack), "--out", s(&wm)]);

    let metrics = t.join("eval/metrics.json");
    ok(&["evaluate", "--pred", s(&t.join("agg/mean.csv")), "--annotations", s(&ann), "--out", s(&metrics)]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(doc["patients"], 1);
    for block in ["segment_based", "event_based"] {
        for row in ["mean", "median"] {
            assert!(doc[block][row].is_object());
        }
    }
    assert!(doc["segment_based"]["mean"]["sp"].as_f64().is_some());
    assert_eq!(doc["per_patient"][0]["patient_id"], "P03");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.join("agg/manifest.json")).unwrap()).unwrap();
    assert!(manifest["commands"]["aggregate"].is_object());
}

#[test]
fn simulate_and_report_are_independent_of_jobs() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let config = small_config(t);
    let a = t.join("a");
    let b = t.join("b");
    ok(&["--jobs", "1", "simulate", "--config", s(&config), "--out", s(&a)]);
    ok(&["--jobs", "3", "simulate", "--config", s(&config), "--out", s(&b)]);
    for f in ["trend.csv", "per_patient.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let r = t.join("r");
    ok(&["report", "--input", s(&a), "--out", s(&r)]);
    let md = fs::read_to_string(r.join("summary.md")).unwrap();
    assert!(md.contains("| mean |") && md.contains("k=2"));
    assert!(r.join("trend.csv").exists());

    let out = neofuse(&["simulate", "--config", s(&config), "--full-grid", "--out", s(&a)]);
    assert_eq!(out.status.code(), Some(1));
}
