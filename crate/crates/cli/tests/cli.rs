use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exnex_core::io::{sha256_file, ConfigFile, RunManifest};

fn exnex(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_exnex"));
    c.args(args).env_remove("EXNEX_CONFIG").env("RUST_LOG", "warn");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn quick_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v = serde_json::to_value(ConfigFile::default()).unwrap();
    v["sampler"]["n_iterations"] = 3000.into();
    v["sampler"]["n_burnin"] = 1000.into();
    v["simulation"]["sampler"]["n_iterations"] = 1500.into();
    v["simulation"]["sampler"]["n_burnin"] = 500.into();
    edit(&mut v);
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn trial_file(dir: &Path) -> PathBuf {
    let p = dir.join("trial.json");
    std::fs::write(
        &p,
        r#"{"schema_version":"1.0","active":"T2","trials":[
            {"subgroup_id":"T1","cohorts":[{"dose_index":0,"n_treated":3,"n_dlt":0},{"dose_index":1,"n_treated":3,"n_dlt":1}]},
            {"subgroup_id":"T2","cohorts":[{"dose_index":0,"n_treated":3,"n_dlt":0}]}]}"#,
    )
    .unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invalid_weights_exit_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), |v| v["subgroups"][0]["weights"]["robust"] = 0.1.into());
    let out = exnex(&["prior-predict", "--config", s(&cfg), "--out", s(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subgroups[0] (T1)"));
}

#[test]
fn bad_animal_rows_exit_with_the_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("animal.csv");
    std::fs::write(&csv, "study_id,species,dose,n,r\nm1,Monkey,1,6,0\nm1,Monkey,10,6,7\n").unwrap();
    let out = exnex(&["prior-predict", "--animal-data", s(&csv), "--out", s(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let t = dir.path().join("t.json");
    std::fs::write(&t, r#"{"schema_version":"7.0","trials":[]}"#).unwrap();
    let out = exnex(&["recommend", "--trial", s(&t), "--out", s(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn domain_errors_exit_with_the_runtime_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = exnex(&["ess", "--moments", "1.5:0.1", "--out", s(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn moments_give_beta_ess() {
    let dir = tempfile::tempdir().unwrap();
    let out = exnex(&["ess", "--moments", "0.25:0.1,0.5:0.6", "--out", s(dir.path())], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // 0.25 * 0.75 / 0.01 - 1 = 17.75
    assert!(text.contains("17.7500"), "{text}");
    assert!(text.contains("infeasible"), "{text}");
}

#[test]
fn environment_variable_supplies_the_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), |v| v["sampler"]["seed"] = 99.into());
    let out_dir = dir.path().join("out");
    let out = exnex(&["prior-predict", "--out", s(&out_dir)], &[("EXNEX_CONFIG", &cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::load(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(m.config_digest, sha256_file(&cfg).unwrap());
    assert_eq!(m.seed, 99);
}

#[test]
fn fit_and_recommend_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), |_| {});
    let trial = trial_file(dir.path());
    for cmd in ["fit", "recommend"] {
        let first = dir.path().join(format!("{cmd}-1"));
        let out = exnex(
            &[cmd, "--config", s(&cfg), "--trial", s(&trial), "--seed", "17", "--out", s(&first)],
            &[],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        if cmd == "recommend" {
            let file = std::fs::read(first.join("recommendation.json")).unwrap();
            assert_eq!(out.stdout, file);
        }
        let second = dir.path().join(format!("{cmd}-2"));
        let manifest = first.join("manifest.json");
        let out = exnex(&["rerun", "--manifest", s(&manifest), "--out", s(&second)], &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let m = RunManifest::load(&manifest).unwrap();
        assert!(!m.outputs.is_empty());
        for o in &m.outputs {
            assert_eq!(
                std::fs::read(first.join(&o.path)).unwrap(),
                std::fs::read(second.join(&o.path)).unwrap(),
                "{}",
                o.path
            );
        }
    }
}

#[test]
fn rerun_detects_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), |_| {});
    let trial = trial_file(dir.path());
    let first = dir.path().join("a");
    let out = exnex(
        &["recommend", "--config", s(&cfg), "--trial", s(&trial), "--out", s(&first)],
        &[],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trial).unwrap().replace("\"n_dlt\":1", "\"n_dlt\":2");
    std::fs::write(&trial, text).unwrap();
    let out = exnex(
        &["rerun", "--manifest", s(&first.join("manifest.json")), "--out", s(&dir.path().join("b"))],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_records_reports_and_a_reproducible_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), |_| {});
    let first = dir.path().join("sim-1");
    let out = exnex(
        &[
            "simulate", "--config", s(&cfg), "--scenario", "5", "--model-variant", "C,E",
            "--replicates", "2", "--seed", "3", "--out", s(&first),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("model C") && text.contains("model E"), "{text}");
    assert!(first.join("records_scenario_5_C.json").exists());
    let second = dir.path().join("sim-2");
    let out = exnex(
        &["rerun", "--manifest", s(&first.join("manifest.json")), "--out", s(&second)],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = exnex(
        &["simulate", "--scenario", "5", "--model-variant", "Z", "--out", s(dir.path())],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn service_recommendation_matches_the_command_line_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), |_| {});
    let trial = trial_file(dir.path());
    let out = exnex(
        &["recommend", "--config", s(&cfg), "--trial", s(&trial), "--seed", "23", "--out", s(dir.path())],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let config: ConfigFile = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let file: exnex_core::io::TrialFile =
        serde_json::from_str(&std::fs::read_to_string(&trial).unwrap()).unwrap();
    let defaults = exnex_service::Defaults {
        config: config.clone(),
        animal_csv: exnex_core::io::animal_csv_string(&exnex_core::presets::animal_studies()),
        seed: 0,
    };
    let req = exnex_service::CreateTrial {
        seed: Some(23),
        active: file.active,
        trials: file.trials,
        animal_csv: None,
        config: Some(config),
    };
    let session = exnex_service::Session::create("parity".into(), &defaults, req).unwrap();
    assert_eq!(session.recommendation_json.as_bytes(), &out.stdout[..]);
}
