use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_schema_version, parse_json, read_text, SCHEMA_VERSION};
use crate::decision::IntervalThresholds;
use crate::error::{Error, Result};
use super::{recommendation_report, RecommendationReport, TrialSet};
use crate::mcmc::{run_posterior, PosteriorResult, SamplerSettings};
use crate::model::{
    AnimalStudy, DoseGrid, HumanTrialState, EpsilonPrior, HyperpriorConfig, MixtureWeights, ModelConfig, NexPrior,
    SpeciesTranslation, TranslationPriors,
};
use crate::presets;
use crate::sim::SimulationConfig;

/// Environment variable naming the configuration file used when no
/// `--config` is given.
pub const CONFIG_ENV: &str = "EXNEX_CONFIG";

/// Weights as written in a file, validated only when the whole
/// configuration is assembled so that errors can name the subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsEntry {
    pub species: Vec<f64>,
    pub human: f64,
    pub robust: f64,
}

impl From<&MixtureWeights> for WeightsEntry {
    fn from(w: &MixtureWeights) -> Self {
        Self {
            species: w.species().to_vec(),
            human: w.human(),
            robust: w.robust(),
        }
    }
}

impl WeightsEntry {
    fn validate(&self, what: &str) -> Result<MixtureWeights> {
        MixtureWeights::new(self.species.clone(), self.human, self.robust)
            .map_err(|e| Error::Config(format!("{what}: {}", strip_prefix(e))))
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidData(m) | Error::Domain(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupEntry {
    pub id: String,
    pub weights: WeightsEntry,
    #[serde(default)]
    pub epsilon: EpsilonPrior,
    #[serde(default)]
    pub nex: NexPrior,
}

/// Conduct rules of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSettings {
    pub max_sample_size: u32,
    pub cohort_size: u32,
    pub no_skipping: bool,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            max_sample_size: presets::MAX_SAMPLE_SIZE,
            cohort_size: presets::COHORT_SIZE,
            no_skipping: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Weights of a subgroup analysed alone with animal co-data.
    pub animal_weights: WeightsEntry,
    /// Budget of every interim fit inside simulated trials.
    #[serde(default = "SamplerSettings::simulation")]
    pub sampler: SamplerSettings,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            animal_weights: (&presets::animal_weights()).into(),
            sampler: SamplerSettings::simulation(),
        }
    }
}

/// On-disk configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: String,
    pub reference_dose: f64,
    pub doses: Vec<f64>,
    pub hyperpriors: HyperpriorConfig,
    pub species: Vec<SpeciesTranslation>,
    pub subgroups: Vec<SubgroupEntry>,
    #[serde(default)]
    pub thresholds: IntervalThresholds,
    #[serde(default)]
    pub design: DesignSettings,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub simulation: SimulationSection,
}

impl Default for ConfigFile {
    /// The shipped defaults: both subgroups with bridged weights.
    fn default() -> Self {
        let model = presets::two_trial_config();
        Self {
            schema_version: SCHEMA_VERSION.into(),
            reference_dose: model.reference_dose,
            doses: presets::DOSES.to_vec(),
            hyperpriors: model.hyper.clone(),
            species: model.translation.species.clone(),
            subgroups: model
                .subgroups
                .iter()
                .enumerate()
                .map(|(l, id)| SubgroupEntry {
                    id: id.clone(),
                    weights: (&model.weights[l]).into(),
                    epsilon: model.translation.epsilon[l],
                    nex: model.nex[l],
                })
                .collect(),
            thresholds: IntervalThresholds::default(),
            design: DesignSettings::default(),
            sampler: SamplerSettings::default(),
            simulation: SimulationSection::default(),
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: DoseGrid,
    pub thresholds: IntervalThresholds,
    pub design: DesignSettings,
    pub sampler: SamplerSettings,
    pub simulation: SimulationConfig,
}

impl RunConfig {
    /// Posterior of the listed trials under this configuration, restricted
    /// to their subgroups, with the given sampler seed.
    pub fn fit(
        &self,
        animal: &[AnimalStudy],
        trials: &[HumanTrialState],
        seed: u64,
    ) -> Result<PosteriorResult> {
        let ids: Vec<&str> = trials.iter().map(|t| t.subgroup_id.as_str()).collect();
        let model = self.model.select_subgroups(&ids)?;
        run_posterior(animal, trials, &model, &self.sampler.clone().with_seed(seed))
    }

    /// Fits every trial of the set and recommends for the active subgroup.
    pub fn recommend(
        &self,
        animal: &[AnimalStudy],
        set: &TrialSet,
        seed: u64,
    ) -> Result<(PosteriorResult, RecommendationReport)> {
        let posterior = self.fit(animal, &set.trials, seed)?;
        let report = recommendation_report(
            &posterior,
            set.active_trial(),
            &self.thresholds,
            self.design.no_skipping,
        )?;
        Ok((posterior, report))
    }

    /// Empty trials for every configured subgroup.
    pub fn empty_trials(&self) -> Result<Vec<HumanTrialState>> {
        self.model
            .subgroups
            .iter()
            .map(|id| {
                HumanTrialState::new(
                    id.clone(),
                    self.grid.clone(),
                    self.design.max_sample_size,
                    self.design.cohort_size,
                )
            })
            .collect()
    }
}

impl ConfigFile {
    pub fn to_run_config(&self) -> Result<RunConfig> {
        check_schema_version(&self.schema_version, "config")
            .map_err(|e| Error::Config(e.to_string()))?;
        let weights = self
            .subgroups
            .iter()
            .enumerate()
            .map(|(i, s)| s.weights.validate(&format!("subgroups[{i}] ({})", s.id)))
            .collect::<Result<Vec<_>>>()?;
        let model = ModelConfig {
            reference_dose: self.reference_dose,
            hyper: self.hyperpriors.clone(),
            translation: TranslationPriors {
                species: self.species.clone(),
                epsilon: self.subgroups.iter().map(|s| s.epsilon).collect(),
            },
            subgroups: self.subgroups.iter().map(|s| s.id.clone()).collect(),
            weights,
            nex: self.subgroups.iter().map(|s| s.nex).collect(),
        };
        model.validate()?;
        let mut ids: Vec<&str> = model.subgroups.iter().map(String::as_str).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("subgroup ids must be distinct".into()));
        }
        let grid = DoseGrid::new(self.doses.clone(), self.reference_dose)
            .map_err(|e| Error::Config(format!("doses: {}", strip_prefix(e))))?;
        self.thresholds.validate()?;
        self.sampler.validate()?;
        let animal_weights = self
            .simulation
            .animal_weights
            .validate("simulation.animal_weights")?;
        if animal_weights.species().len() != model.n_species() {
            return Err(Error::Config(format!(
                "simulation.animal_weights: {} species weights for {} species",
                animal_weights.species().len(),
                model.n_species()
            )));
        }
        let d = self.design;
        if d.cohort_size == 0 || d.max_sample_size < d.cohort_size {
            return Err(Error::Config(
                "design: cohort size must be in 1..=max_sample_size".into(),
            ));
        }
        let simulation = SimulationConfig {
            base: model.clone(),
            animal_weights,
            thresholds: self.thresholds,
            no_skipping: d.no_skipping,
            max_sample_size: d.max_sample_size,
            cohort_size: d.cohort_size,
            sampler: self.simulation.sampler.clone(),
        };
        Ok(RunConfig {
            model,
            grid,
            thresholds: self.thresholds,
            design: d,
            sampler: self.sampler.clone(),
            simulation,
        })
    }
}

/// Loads and validates a configuration. With no explicit path the file
/// named by [`CONFIG_ENV`] is used, and failing that the built-in defaults.
/// Returns the configuration, its file form, and the bytes it was read from.
/// Every failure is reported as a configuration error.
pub fn load_config(path: Option<&Path>) -> Result<(RunConfig, ConfigFile, Vec<u8>)> {
    let resolved: Option<PathBuf> = path
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let as_config = |e: Error| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    };
    let (file, bytes) = match resolved {
        Some(p) => {
            let text = read_text(&p).map_err(as_config)?;
            let shown = p.display().to_string();
            #[derive(Deserialize)]
            struct Probe {
                schema_version: Option<String>,
            }
            let probe: Probe = parse_json(&text, &shown).map_err(as_config)?;
            let v = probe
                .schema_version
                .ok_or_else(|| Error::Config(format!("{shown}: missing schema_version")))?;
            check_schema_version(&v, &shown).map_err(as_config)?;
            let file: ConfigFile = parse_json(&text, &shown).map_err(as_config)?;
            (file, text.into_bytes())
        }
        None => {
            let file = ConfigFile::default();
            let text = super::to_json_string(&file)?;
            (file, text.into_bytes())
        }
    };
    let run = file.to_run_config()?;
    Ok((run, file, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_file_matches_presets() {
        let run = ConfigFile::default().to_run_config().unwrap();
        assert_eq!(run.model, presets::two_trial_config());
        assert_eq!(run.simulation, SimulationConfig::default());
    }

    #[test]
    fn weight_errors_name_the_subgroup() {
        let mut f = ConfigFile::default();
        f.subgroups[1].weights.robust = 0.1;
        let err = f.to_run_config().unwrap_err().to_string();
        assert!(err.contains("subgroups[1] (T2)"), "{err}");
    }
}
