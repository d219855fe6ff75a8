use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zz")).args(args).output().expect("spawn zz")
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = zz(&["sample", "--scheme", "importance", "--attempts", "1000", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = read_dir_bytes(&a);
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, read_dir_bytes(&b));
}

#[test]
fn sample_replays_from_written_config() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = zz(&[
        "sample", "--scheme", "stratified,m=3", "--prior", "laplace:2", "--attempts", "2000", "--seed", "3",
        "--precondition", "adaptive:20,1000", "--record-mode", "full_state", "--out", a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = a.join("config.json");
    let o = zz(&["sample", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn gen_then_sample_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("d.csv");
    let o = zz(&["gen", "--n", "200", "--p", "3", "--sparsity", "0.3", "--ones", "20", "--seed", "1", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let o = zz(&["ingest", "--data", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["n"], 200);
    assert_eq!(report["positives"], 20);
    let out = tmp.path().join("run");
    let o = zz(&[
        "sample", "--data", csv.to_str().unwrap(), "--intercept", "--scheme", "importance,cv", "--attempts", "5000",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mean"].as_array().unwrap().len(), 4);
    assert!(out.join("ingest.json").exists());
}

#[test]
fn diag_flags_undefined_iact_without_events() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    // One attempt cannot flip every dimension.
    let o = zz(&["sample", "--scheme", "uniform", "--attempts", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = zz(&["diag", "--skeleton", out.join("skeleton.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["iact_defined"], false);
    assert!(report["mixing"]["mixing_time"].is_null());
}

#[test]
fn experiment_writes_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"experiment":"scaling_alpha","n":500,"p":5,"alphas":[0.2,0.1],"prior":{"kind":"gaussian","variance":1e10},"attempts":20000,"replicates":2,"seed":4}"#,
    )
    .unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = zz(&["experiment", "--config", cfg.to_str().unwrap(), "--jobs", "2", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows[0], "alpha,replicates,mean_gain,sd_gain");
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        let gain: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert!(gain > 1.0, "{r}");
    }
    // Replay from the manifest's config.
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let replay = tmp.path().join("replay.json");
    fs::write(&replay, manifest["config"].to_string()).unwrap();
    let o = zz(&["experiment", "--config", replay.to_str().unwrap(), "--jobs", "1", "--out", b.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    for args in [
        vec!["sample", "--scheme", "bogus", "--out", out],
        vec!["sample", "--scheme", "stratified,cv", "--out", out],
        vec!["sample", "--prior", "gaussian:-1", "--out", out],
        vec!["sample", "--precondition", "adaptive:0,10", "--out", out],
        vec!["sample", "--data", "/nonexistent.csv", "--out", out],
        vec!["no-such-command"],
    ] {
        let o = zz(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"experiment":"scaling_alpha","alphas":[]}"#).unwrap();
    let o = zz(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}
