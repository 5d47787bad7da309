use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tfr_core::generator::container::{create_record_file, Record, RecordHeader};
use tfr_core::generator::{read_manifest, read_set, SetTag};
use tfr_core::reconstruct::{Method, Normalization};
use tfr_harness::pipeline::{dataset_hash, PredictionSet, PredictionsManifest};

fn tfr(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tfr"));
    cmd.args(args).env_remove("TFR_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, extra: &str, baselines: &str, counts: &str) -> PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "name": "small",
  "case": "HSink",
  "case_options": {{ "grid_n": 32 }},
  "solver": {{ "method": "direct" }},
  "seed": 3,
  "counts": {counts},
  "baselines": {baselines},
  "metrics": {{ "per_sample": true }}{extra}
}}"#
    );
    fs::write(&path, text).unwrap();
    path
}

const ALL_SETS: &str = r#"{"Train": 20, "Test0": 10, "Test1": 4, "Test2": 4, "Test3": 4, "Test4": 4, "Test5": 4}"#;

fn error_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)));
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_the_requested_composition_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", "[]", ALL_SETS);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = tfr(&["generate", "--config", path_str(&cfg), "--out", path_str(out)], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = read_manifest(&a.join("dataset")).unwrap();
    assert_eq!(manifest.sets.len(), 7);
    assert_eq!(manifest.sets.iter().map(|s| s.count).sum::<usize>(), 50);
    let mut files: Vec<_> = fs::read_dir(a.join("dataset")).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 8);
    for f in files {
        assert_eq!(fs::read(a.join("dataset").join(&f)).unwrap(), fs::read(b.join("dataset").join(&f)).unwrap());
    }
}

#[test]
fn seed_override_changes_the_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", "[]", r#"{"Test0": 2}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(tfr(&["generate", "--config", path_str(&cfg), "--out", path_str(&a)], &[]).status.success());
    assert!(tfr(&["generate", "--config", path_str(&cfg), "--out", path_str(&b), "--seed", "4"], &[]).status.success());
    assert_ne!(
        fs::read(a.join("dataset/test0.tfrs")).unwrap(),
        fs::read(b.join("dataset/test0.tfrs")).unwrap()
    );
}

#[test]
fn unknown_case_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", "[]", ALL_SETS);
    let text = fs::read_to_string(&cfg).unwrap().replace("HSink", "Volcano");
    fs::write(&cfg, text).unwrap();
    let o = tfr(&["generate", "--config", path_str(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "config");
}

#[test]
fn bad_flags_and_thread_settings_exit_two() {
    let o = tfr(&["generate", "--bogus"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "usage");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", "[]", ALL_SETS);
    let o = tfr(&["generate", "--config", path_str(&cfg)], &[("TFR_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn knn_with_too_many_neighbours_fails_before_solving() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", r#"[{"kind": "knn_interp", "k": 33}]"#, ALL_SETS);
    let out = tmp.path().join("run");
    let o = tfr(&["generate", "--config", path_str(&cfg), "--out", path_str(&out)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "config");
    assert!(!out.join("dataset").exists());
}

#[test]
fn vector_network_needs_a_train_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", r#"[{"kind": "mlp_vector", "epochs": 1}]"#, r#"{"Test0": 2}"#);
    let out = tmp.path().join("run");
    assert!(tfr(&["generate", "--config", path_str(&cfg), "--out", path_str(&out)], &[]).status.success());
    let o = tfr(&["reconstruct", "--config", path_str(&cfg), "--out", path_str(&out)], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_kind(&o), "missing_train_set");
}

#[test]
fn reconstruct_and_evaluate_one_method() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", r#"[{"kind": "global_interp"}]"#, ALL_SETS);
    let out = tmp.path().join("run");
    let o = tfr(&["run", "--config", path_str(&cfg), "--out", path_str(&out), "--threads", "2"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let pm: PredictionsManifest =
        serde_json::from_str(&fs::read_to_string(out.join("predictions/global_interp/manifest.json")).unwrap()).unwrap();
    assert_eq!(pm.sets.iter().find(|s| s.tag == SetTag::Test0).unwrap().count, 10);
    assert_eq!(pm.config_hash, dataset_hash(&out.join("dataset")).unwrap());

    let csv = fs::read_to_string(out.join("reports/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,case,test_set,mae,maxae,cmae,mcae,bmae,n_samples,config_hash");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.starts_with("global_interp,HSink,Test") && l.ends_with(&pm.config_hash)));
    let per_sample = fs::read_to_string(out.join("reports/per_sample.csv")).unwrap();
    assert_eq!(per_sample.lines().count(), 1 + 30);

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("reports/report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["config_hash"], pm.config_hash.as_str());
    assert_eq!(report["rows"].as_array().unwrap().len(), 6);

    let o = tfr(&["report", path_str(&out.join("reports/metrics.csv"))], &[]);
    assert!(o.status.success());
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.contains("| global_interp |"));
}

#[test]
fn perfect_predictions_score_zero_and_hashes_are_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "", r#"[{"kind": "poly"}]"#, r#"{"Test0": 3, "Test5": 2}"#);
    let out = tmp.path().join("run");
    assert!(tfr(&["generate", "--config", path_str(&cfg), "--out", path_str(&out)], &[]).status.success());

    let dataset = out.join("dataset");
    let manifest = read_manifest(&dataset).unwrap();
    let dir = out.join("predictions/poly");
    fs::create_dir_all(&dir).unwrap();
    let mut sets = Vec::new();
    for tag in [SetTag::Test0, SetTag::Test5] {
        let samples = read_set(&dataset, &manifest, tag).unwrap();
        let file = format!("{}.tfrs", tag.name().to_lowercase());
        let header = RecordHeader {
            grid_n: 32,
            sources: 0,
            monitors: 0,
        };
        let mut w = create_record_file(&dir.join(&file), header).unwrap();
        for s in &samples {
            w.push(&Record {
                intensities: vec![],
                monitor_temps: vec![],
                field: s.field.values().to_vec(),
            })
            .unwrap();
        }
        w.finish().unwrap();
        sets.push(PredictionSet {
            tag,
            count: samples.len(),
            file,
            rank_warnings: 0,
        });
    }
    let mut pm = PredictionsManifest {
        method: Method::from_name("poly").unwrap(),
        config_hash: dataset_hash(&dataset).unwrap(),
        grid_n: 32,
        normalization: Normalization::default(),
        weights: None,
        sets,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string(&pm).unwrap()).unwrap();
    let o = tfr(&["evaluate", "--config", path_str(&cfg), "--out", path_str(&out)], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("reports/metrics.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(cols[3..8].iter().all(|v| *v == "0.000000"), "{line}");
    }

    pm.config_hash = "0".repeat(64);
    fs::write(dir.join("manifest.json"), serde_json::to_string(&pm).unwrap()).unwrap();
    let o = tfr(&["evaluate", "--config", path_str(&cfg), "--out", path_str(&out)], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_kind(&o), "config_hash_mismatch");
}
