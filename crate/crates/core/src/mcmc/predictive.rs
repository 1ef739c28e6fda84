use super::result::SubgroupSummary;
use super::sampler::run_posterior;
use super::settings::SamplerSettings;
use crate::error::{Error, Result};
use crate::model::{AnimalStudy, HumanTrialState, ModelConfig};

/// Predictive priors of the per-dose DLT risks in each subgroup, given
/// animal data only. Human trials must not have enrolled anyone yet.
///
/// Single-species projections come from the weights alone, e.g. monkey-only
/// weights `(0, 1, 0, 0)` over (Rat, Monkey, Human, Robust).
pub fn prior_predictive(
    animal: &[AnimalStudy],
    human: &[HumanTrialState],
    config: &ModelConfig,
    settings: &SamplerSettings,
) -> Result<Vec<SubgroupSummary>> {
    if let Some(t) = human.iter().find(|t| !t.cohorts().is_empty()) {
        return Err(Error::State(format!(
            "trial {} already has cohorts; predictive priors need empty trials",
            t.subgroup_id
        )));
    }
    Ok(run_posterior(animal, human, config, settings)?.summaries())
}
