use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MixtureWeights, ModelConfig};

/// Analysis model used to conduct a simulated pair of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Animal data plus bridging between the human subgroups.
    A,
    /// No animal data; the subgroups are fully exchangeable.
    B,
    /// As `B` with a 0.2 non-exchangeability weight.
    #[serde(rename = "B-robust")]
    BRobust,
    /// Each trial analysed on its own, without co-data.
    C,
    /// Animal data for each trial separately, no bridging.
    D,
    /// The first trial on its own; the second pools the first trial's data.
    E,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 6] = [
        ModelVariant::A,
        ModelVariant::B,
        ModelVariant::BRobust,
        ModelVariant::C,
        ModelVariant::D,
        ModelVariant::E,
    ];

    pub fn uses_animal_data(self) -> bool {
        matches!(self, ModelVariant::A | ModelVariant::D)
    }

    /// Whether the second trial's starting dose comes from a co-data
    /// posterior; otherwise it starts at the lowest dose.
    pub fn conditions_second_start(self) -> bool {
        matches!(
            self,
            ModelVariant::A | ModelVariant::B | ModelVariant::BRobust | ModelVariant::E
        )
    }

    fn single_weights(self, n_species: usize, animal: &MixtureWeights) -> Result<MixtureWeights> {
        Ok(match self {
            ModelVariant::A | ModelVariant::D => animal.clone(),
            ModelVariant::B => MixtureWeights::new(vec![0.0; n_species], 1.0, 0.0)?,
            ModelVariant::BRobust => MixtureWeights::new(vec![0.0; n_species], 0.8, 0.2)?,
            ModelVariant::C | ModelVariant::E => MixtureWeights::robust_only(n_species),
        })
    }

    /// Configuration for fitting the first trial alone.
    ///
    /// `base` lists both subgroups with their joint-analysis weights; `animal`
    /// holds the weights of a subgroup analysed alone with animal co-data.
    pub fn first_stage_config(
        self,
        base: &ModelConfig,
        first: &str,
        animal: &MixtureWeights,
    ) -> Result<ModelConfig> {
        let mut cfg = base.select_subgroups(&[first])?;
        cfg.weights = vec![self.single_weights(base.n_species(), animal)?];
        self.strip_species(cfg)
    }

    /// Configuration for the second stage. Joint variants (A, B, B-robust)
    /// list both subgroups; the others analyse the second subgroup alone
    /// (pooled with the first trial's cohorts under E).
    pub fn second_stage_config(
        self,
        base: &ModelConfig,
        first: &str,
        second: &str,
        animal: &MixtureWeights,
    ) -> Result<ModelConfig> {
        let cfg = match self {
            ModelVariant::A => base.select_subgroups(&[first, second])?,
            ModelVariant::B | ModelVariant::BRobust => {
                let mut cfg = base.select_subgroups(&[first, second])?;
                let w = self.single_weights(base.n_species(), animal)?;
                cfg.weights = vec![w.clone(), w];
                cfg
            }
            ModelVariant::C | ModelVariant::D | ModelVariant::E => {
                let mut cfg = base.select_subgroups(&[second])?;
                cfg.weights = vec![self.single_weights(base.n_species(), animal)?];
                cfg
            }
        };
        self.strip_species(cfg)
    }

    fn strip_species(self, cfg: ModelConfig) -> Result<ModelConfig> {
        if self.uses_animal_data() {
            Ok(cfg)
        } else {
            cfg.without_species()
        }
    }

    pub fn is_joint(self) -> bool {
        matches!(self, ModelVariant::A | ModelVariant::B | ModelVariant::BRobust)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::A => "A",
            ModelVariant::B => "B",
            ModelVariant::BRobust => "B-robust",
            ModelVariant::C => "C",
            ModelVariant::D => "D",
            ModelVariant::E => "E",
        })
    }
}

impl FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!("unknown model variant {s}; expected A, B, B-robust, C, D or E"))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn first_stage_of_a_and_d_coincide() {
        let base = presets::two_trial_config();
        let w = presets::animal_weights();
        let a = ModelVariant::A.first_stage_config(&base, "T1", &w).unwrap();
        let d = ModelVariant::D.first_stage_config(&base, "T1", &w).unwrap();
        assert_eq!(a, d);
        assert_eq!(a.weights[0].as_vec(), vec![0.2, 0.6, 0.0, 0.2]);
    }

    #[test]
    fn variants_without_animals_drop_species() {
        let base = presets::two_trial_config();
        let w = presets::animal_weights();
        for v in [ModelVariant::B, ModelVariant::C, ModelVariant::E] {
            let cfg = v.second_stage_config(&base, "T1", "T2", &w).unwrap();
            assert_eq!(cfg.n_species(), 0, "{v}");
        }
        let b = ModelVariant::B.second_stage_config(&base, "T1", "T2", &w).unwrap();
        assert_eq!(b.weights[1].as_vec(), vec![1.0, 0.0]);
        let a = ModelVariant::A.second_stage_config(&base, "T1", "T2", &w).unwrap();
        assert_eq!(a.weights[1].as_vec(), vec![0.1, 0.5, 0.2, 0.2]);
    }

    #[test]
    fn parses_names() {
        for v in ModelVariant::ALL {
            assert_eq!(v.to_string().parse::<ModelVariant>().unwrap(), v);
        }
        assert!("F".parse::<ModelVariant>().is_err());
    }
}
