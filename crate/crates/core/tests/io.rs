use std::path::{Path, PathBuf};

use exnex_core::io::*;
use exnex_core::model::{Cohort, EpsilonPrior};
use exnex_core::presets;
use exnex_core::sim::*;

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn shipped_default_config_carries_the_documented_priors() {
    let (run, file, _) = load_config(Some(&shipped("default_config.json"))).unwrap();
    assert_eq!(file, ConfigFile::default());
    let m = &run.model;
    assert_eq!(m.reference_dose, 5.0);
    assert_eq!((m.hyper.mean_intercept.mean, m.hyper.mean_intercept.sd), (-1.099, 1.98));
    assert_eq!((m.hyper.mean_log_slope.mean, m.hyper.mean_log_slope.sd), (0.0, 0.99));
    assert_eq!(m.hyper.sigma_scales, [1.0, 0.5]);
    assert_eq!(m.hyper.tau_scales, [0.5, 0.25, 0.25, 0.125]);
    let sp = &m.translation.species;
    assert_eq!((sp[0].species.as_str(), sp[0].log_location, sp[0].log_scale), ("Rat", -1.820, 0.323));
    assert_eq!((sp[1].species.as_str(), sp[1].log_location, sp[1].log_scale), ("Monkey", -1.127, 0.273));
    assert_eq!(m.translation.epsilon, vec![EpsilonPrior::default(); 2]);
    assert_eq!(m.weights[1].as_vec(), vec![0.1, 0.5, 0.2, 0.2]);
    assert_eq!(run.grid.doses(), &presets::DOSES);
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v = serde_json::to_value(ConfigFile::default()).unwrap();
    edit(&mut v);
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
    p
}

#[test]
fn config_errors_are_located() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), |v| {
        v["subgroups"][1]["weights"]["robust"] = 0.1.into();
    });
    let err = load_config(Some(&p)).unwrap_err();
    assert!(matches!(err, exnex_core::Error::Config(_)));
    assert!(err.to_string().contains("subgroups[1] (T2)"), "{err}");

    let p = write_config(dir.path(), |v| {
        v["hyperpriors"]["tau_scales"][2] = "wide".into();
    });
    let err = load_config(Some(&p)).unwrap_err().to_string();
    assert!(err.contains("hyperpriors.tau_scales[2]"), "{err}");

    let p = write_config(dir.path(), |v| v["schema_version"] = "2.0".into());
    let err = load_config(Some(&p)).unwrap_err().to_string();
    assert!(err.contains("schema_version"), "{err}");

    let p = write_config(dir.path(), |v| v["surprise"] = 1.into());
    assert!(load_config(Some(&p)).is_err());

    assert!(load_config(Some(&dir.path().join("missing.json"))).is_err());
}

#[test]
fn animal_data_round_trips() {
    let shipped_studies = load_animal_data(&shipped("animal_studies.csv"), 5.0).unwrap();
    assert_eq!(shipped_studies, presets::animal_studies());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    let monkey = vec![shipped_studies[0].clone()];
    write_animal_data(&p, &monkey).unwrap();
    assert_eq!(load_animal_data(&p, 5.0).unwrap(), monkey);
}

#[test]
fn trial_state_round_trips_and_rejects_bad_counts() {
    let run = ConfigFile::default().to_run_config().unwrap();
    let file = TrialFile {
        schema_version: "1.0".into(),
        active: None,
        trials: vec![
            TrialEntry {
                subgroup_id: "T1".into(),
                cohorts: vec![Cohort { dose_index: 0, n_treated: 3, n_dlt: 0 }],
            },
            TrialEntry { subgroup_id: "T2".into(), cohorts: vec![] },
        ],
    };
    let set = file.to_trial_set(&run.grid, &run.design).unwrap();
    assert_eq!(set.active, "T2");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trial.json");
    write_trial_state(&p, &set).unwrap();
    assert_eq!(load_trial_state(&p, &run.grid, &run.design).unwrap(), set);

    let mut bad = file.clone();
    bad.trials[0].cohorts[0].n_dlt = 4;
    assert!(matches!(
        bad.to_trial_set(&run.grid, &run.design),
        Err(exnex_core::Error::InvalidData(_))
    ));
    let mut v = serde_json::to_value(&file).unwrap();
    v["schema_version"] = "9.1".into();
    std::fs::write(&p, v.to_string()).unwrap();
    assert!(load_trial_state(&p, &run.grid, &run.design).is_err());
}

#[test]
fn shipped_scenarios_are_the_standard_six() {
    let s = load_scenarios(&shipped("scenarios.json")).unwrap();
    let standard: Vec<_> = (1..=6).map(|n| ScenarioSpec::standard(n).unwrap()).collect();
    assert_eq!(s, standard);
}

#[test]
fn persisted_records_reproduce_the_report() {
    let s = ScenarioSpec::standard(5).unwrap();
    let cfg = SimulationConfig::default();
    let recs = simulate_replicates(&s, &[ModelVariant::C], &[], &cfg, 3, 8).unwrap().remove(0);
    let before = operating_characteristics(&s, &recs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("records.json");
    SimulationRecords::new(&s, ModelVariant::C, 8, recs.clone()).write(&p).unwrap();
    let back = SimulationRecords::load(&p).unwrap();
    assert_eq!(back.records, recs);
    assert_eq!(back.operating_characteristics().unwrap(), before);
}

#[test]
fn manifests_record_digests() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("out.txt"), "abc").unwrap();
    let mut m = RunManifest::new("fit", serde_json::json!({}), b"{}", serde_json::json!({}), 3);
    m.add_input("animal_data", &shipped("animal_studies.csv")).unwrap();
    m.finish(dir.path(), &["out.txt"]).unwrap();
    assert_eq!(
        m.outputs[0].sha256,
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
    let p = dir.path().join("manifest.json");
    m.write(&p).unwrap();
    assert_eq!(RunManifest::load(&p).unwrap(), m);
    assert!(m.mismatched_outputs(dir.path()).unwrap().is_empty());
    std::fs::write(dir.path().join("out.txt"), "abd").unwrap();
    assert_eq!(m.mismatched_outputs(dir.path()).unwrap(), vec!["out.txt"]);
}
