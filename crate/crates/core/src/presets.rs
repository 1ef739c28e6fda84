//! Standard priors, dose grid and animal data used by the default analysis.

use crate::error::Result;
use crate::model::{
    AnimalStudy, DoseGrid, EpsilonPrior, HyperpriorConfig, MixtureWeights, ModelConfig, NexPrior,
    SpeciesTranslation, TranslationPriors,
};

pub const REFERENCE_DOSE: f64 = 5.0;
pub const DOSES: [f64; 6] = [0.1, 0.5, 1.0, 5.0, 10.0, 20.0];
pub const SPECIES: [&str; 2] = ["Rat", "Monkey"];
pub const MAX_SAMPLE_SIZE: u32 = 24;
pub const COHORT_SIZE: u32 = 3;

pub fn dose_grid() -> DoseGrid {
    DoseGrid::new(DOSES.to_vec(), REFERENCE_DOSE).expect("static grid is valid")
}

/// Log-normal translation priors: rat `LN(-1.820, 0.323^2)`, monkey
/// `LN(-1.127, 0.273^2)`.
pub fn species_translations() -> Vec<SpeciesTranslation> {
    vec![
        SpeciesTranslation {
            species: "Rat".into(),
            log_location: -1.820,
            log_scale: 0.323,
        },
        SpeciesTranslation {
            species: "Monkey".into(),
            log_location: -1.127,
            log_scale: 0.273,
        },
    ]
}

/// Weights (Rat, Monkey, Human, Robust) for a subgroup analysed without
/// other human subgroups.
pub fn animal_weights() -> MixtureWeights {
    MixtureWeights::new(vec![0.2, 0.6], 0.0, 0.2).expect("static weights are valid")
}

/// Weights for a subgroup analysed jointly with another human subgroup.
pub fn bridged_weights() -> MixtureWeights {
    MixtureWeights::new(vec![0.1, 0.5], 0.2, 0.2).expect("static weights are valid")
}

/// Default configuration over the given subgroups and weights, with two
/// animal species and the standard hyperpriors.
pub fn config(subgroups: &[(&str, MixtureWeights)]) -> Result<ModelConfig> {
    let cfg = ModelConfig {
        reference_dose: REFERENCE_DOSE,
        hyper: HyperpriorConfig::default(),
        translation: TranslationPriors {
            species: species_translations(),
            epsilon: vec![EpsilonPrior::default(); subgroups.len()],
        },
        subgroups: subgroups.iter().map(|(id, _)| id.to_string()).collect(),
        weights: subgroups.iter().map(|(_, w)| w.clone()).collect(),
        nex: vec![NexPrior::default(); subgroups.len()],
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Two subgroups `T1` and `T2` with the bridged weights.
pub fn two_trial_config() -> ModelConfig {
    config(&[("T1", bridged_weights()), ("T2", bridged_weights())])
        .expect("static config is valid")
}

/// Shipped toxicology studies: two monkey and three rat studies.
pub fn animal_studies() -> Vec<AnimalStudy> {
    let grid = |d: &[f64]| DoseGrid::new(d.to_vec(), REFERENCE_DOSE).expect("static grid");
    let study = |id: &str, sp: &str, d: &[f64], n: &[u32], r: &[u32]| {
        AnimalStudy::new(id, sp, grid(d), n.to_vec(), r.to_vec()).expect("static study")
    };
    vec![
        study("m1", "Monkey", &[1.0, 10.0, 30.0, 100.0], &[4, 6, 6, 4], &[0, 1, 2, 3]),
        study("m2", "Monkey", &[1.0, 10.0, 30.0, 100.0], &[6, 12, 8, 6], &[0, 2, 3, 4]),
        study("r1", "Rat", &[1.0, 3.0, 10.0, 30.0], &[10, 10, 10, 10], &[0, 1, 4, 6]),
        study("r2", "Rat", &[1.0, 3.0, 10.0], &[10, 10, 10], &[1, 2, 3]),
        study("r3", "Rat", &[3.0, 10.0, 30.0], &[8, 8, 8], &[1, 3, 5]),
    ]
}
