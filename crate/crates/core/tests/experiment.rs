use zigzag_core::experiment::{cell, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
    "experiment": "scheme_comparison",
    "data": {"source": "synthetic", "spec": {"n": 300, "p": 4, "sparsity": 0.3, "density": "laplace",
             "coefficients": "random_unit", "responses": {"fixed_ones": {"k": 15}}}},
    "schemes": ["uniform", "importance", "stratified,m=3"],
    "attempts": 20000,
    "samples": 2000,
    "replicates": 3,
    "seed": 12
}"#;

#[test]
fn manifest_replays_to_identical_tables() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let first = run_experiment(&cfg, Some(2)).unwrap();
    let replayed = ExperimentConfig::from_json(&serde_json::to_string(&first.manifest.config).unwrap()).unwrap();
    let second = run_experiment(&replayed, Some(1)).unwrap();
    assert_eq!(first.tables, second.tables);
    // One data seed plus one run seed per scheme, per replicate.
    assert_eq!(first.manifest.runs.len(), 12);

    let dir = tempfile::tempdir().unwrap();
    first.write(dir.path()).unwrap();
    for name in ["summary.csv", "runs.csv", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let summary = first.table("summary").unwrap();
    assert_eq!(summary.rows.len(), 3);
    for r in 0..3 {
        assert!(cell(summary, r, "median_mixing_time").unwrap() > 0.0);
    }
}

#[test]
fn unknown_fields_and_bad_values_are_rejected() {
    assert!(ExperimentConfig::from_json(r#"{"experiment":"scaling_n","ns":[]}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"experiment":"warp_drive"}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"experiment":"scaling_alpha","alphas":[1.5]}"#).is_err());
}
