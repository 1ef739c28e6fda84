use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::ScenarioSpec;
use super::variant::ModelVariant;
use crate::decision::{
    declare_mtd, recommend_next_dose, starting_dose, DecisionKind, DoseDecision,
    IntervalThresholds,
};
use crate::error::{Error, Result};
use crate::mcmc::{run_posterior, PosteriorResult, SamplerSettings};
use crate::model::{AnimalStudy, Cohort, DoseGrid, HumanTrialState, MixtureWeights, ModelConfig};
use crate::presets;
use crate::rng::{self, StreamRng};

const OUTCOME_KEY: u64 = 0x0dc0_0001;
const FIT_KEY: u64 = 0x0f17_0002;

/// Number of DLTs among `n` patients with true risk `true_p`: each patient
/// has a DLT when a uniform draw falls below `true_p`.
pub fn simulate_outcomes(true_p: f64, n: u32, rng: &mut StreamRng) -> u32 {
    (0..n).map(|_| (rng.random::<f64>() < true_p) as u32).sum()
}

/// Settings shared by every simulated trial pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Both subgroups with the weights of the joint analysis.
    pub base: ModelConfig,
    /// Weights of a subgroup analysed alone with animal co-data.
    pub animal_weights: MixtureWeights,
    pub thresholds: IntervalThresholds,
    pub no_skipping: bool,
    pub max_sample_size: u32,
    pub cohort_size: u32,
    pub sampler: SamplerSettings,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            base: presets::two_trial_config(),
            animal_weights: presets::animal_weights(),
            thresholds: IntervalThresholds::default(),
            no_skipping: true,
            max_sample_size: presets::MAX_SAMPLE_SIZE,
            cohort_size: presets::COHORT_SIZE,
            sampler: SamplerSettings::simulation(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.thresholds.validate()?;
        self.sampler.validate()?;
        if self.base.n_subgroups() < 2 {
            return Err(Error::Config(
                "simulation base configuration needs both subgroups".into(),
            ));
        }
        if self.cohort_size == 0 || self.max_sample_size < self.cohort_size {
            return Err(Error::Config("cohort size must be in 1..=max sample size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Completed,
    StoppedForSafety,
}

/// Full history of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subgroup_id: String,
    pub start_dose: usize,
    pub cohorts: Vec<Cohort>,
    /// Decision taken after each cohort.
    pub decisions: Vec<DoseDecision>,
    pub outcome: TrialOutcome,
    pub mtd: Option<usize>,
    /// Posterior mean of the subgroup's bridging factor at the final analysis.
    pub epsilon_mean: f64,
    pub component_labels: Vec<String>,
    pub component_frequencies: Vec<f64>,
}

impl TrialRecord {
    pub fn completed(&self) -> bool {
        self.outcome == TrialOutcome::Completed
    }

    pub fn patients_per_dose(&self, n_doses: usize) -> Vec<u32> {
        let mut v = vec![0; n_doses];
        for c in &self.cohorts {
            v[c.dose_index] += c.n_treated;
        }
        v
    }

    pub fn dlts_per_dose(&self, n_doses: usize) -> Vec<u32> {
        let mut v = vec![0; n_doses];
        for c in &self.cohorts {
            v[c.dose_index] += c.n_dlt;
        }
        v
    }

    pub fn total_dlts(&self) -> u32 {
        self.cohorts.iter().map(|c| c.n_dlt).sum()
    }

    /// True when no cohort was dosed more than one level above every
    /// earlier cohort. The starting dose itself is exempt.
    pub fn respects_no_skipping(&self) -> bool {
        let mut highest: Option<usize> = None;
        for c in &self.cohorts {
            if let Some(h) = highest {
                if c.dose_index > h + 1 {
                    return false;
                }
            }
            highest = Some(highest.map_or(c.dose_index, |h| h.max(c.dose_index)));
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub scenario: String,
    pub variant: ModelVariant,
    pub replicate: usize,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
}

struct Stage<'a> {
    cfg: &'a SimulationConfig,
    grid: &'a DoseGrid,
    truth: &'a [f64],
    replicate_seed: u64,
    trial_index: u64,
}

impl Stage<'_> {
    fn outcome_stream(&self, cohort: u64) -> StreamRng {
        rng::stream(
            rng::derive_path(self.replicate_seed, &[OUTCOME_KEY, self.trial_index]),
            cohort,
        )
    }

    fn fit_settings(&self, cohort: u64) -> SamplerSettings {
        let seed = rng::derive_path(self.replicate_seed, &[FIT_KEY, self.trial_index, cohort]);
        self.cfg.sampler.clone().with_seed(seed)
    }

    /// Runs cohorts until completion or a stop for safety. `fit` returns the
    /// posterior given the stage trial's current state.
    fn run(
        &self,
        subgroup_id: &str,
        start: usize,
        fit: &dyn Fn(&HumanTrialState, &SamplerSettings) -> Result<PosteriorResult>,
    ) -> Result<TrialRecord> {
        let cfg = self.cfg;
        let mut trial = HumanTrialState::new(
            subgroup_id,
            self.grid.clone(),
            cfg.max_sample_size,
            cfg.cohort_size,
        )?;
        let mut decisions = Vec::new();
        let mut next = start;
        loop {
            let h = trial.cohorts().len() as u64 + 1;
            let n = cfg.cohort_size.min(cfg.max_sample_size - trial.total_treated());
            let r = simulate_outcomes(self.truth[next], n, &mut self.outcome_stream(h));
            trial.push_cohort(Cohort {
                dose_index: next,
                n_treated: n,
                n_dlt: r,
            })?;
            let post = fit(&trial, &self.fit_settings(h))?;
            let decision = recommend_next_dose(&post, &trial, &cfg.thresholds, cfg.no_skipping)?;
            let kind = decision.kind;
            let dose = decision.dose_index;
            decisions.push(decision);
            if matches!(kind, DecisionKind::Complete | DecisionKind::StopForSafety) {
                let sub = post.subgroup(subgroup_id)?;
                let (outcome, mtd) = if kind == DecisionKind::Complete {
                    (
                        TrialOutcome::Completed,
                        declare_mtd(&post, &trial, &cfg.thresholds)?,
                    )
                } else {
                    (TrialOutcome::StoppedForSafety, None)
                };
                return Ok(TrialRecord {
                    subgroup_id: subgroup_id.to_string(),
                    start_dose: start,
                    cohorts: trial.cohorts().to_vec(),
                    decisions,
                    outcome,
                    mtd,
                    epsilon_mean: sub.epsilon_mean(),
                    component_labels: sub.component_labels.clone(),
                    component_frequencies: sub.component_frequencies.clone(),
                });
            }
            next = dose.expect("dosing decisions carry a dose");
        }
    }
}

fn replicate_seed(master: u64, replicate: usize) -> u64 {
    rng::derive_seed(master, replicate as u64)
}

fn first_stage(
    scenario: &ScenarioSpec,
    variant: ModelVariant,
    animal: &[AnimalStudy],
    cfg: &SimulationConfig,
    grid: &DoseGrid,
    seed: u64,
) -> Result<TrialRecord> {
    let first = &scenario.trials[0];
    let model = variant.first_stage_config(&cfg.base, &first.subgroup_id, &cfg.animal_weights)?;
    let animal = if variant.uses_animal_data() { animal } else { &[] };
    let stage = Stage {
        cfg,
        grid,
        truth: &first.true_p,
        replicate_seed: seed,
        trial_index: 0,
    };
    stage.run(&first.subgroup_id, 0, &|t, s| {
        run_posterior(animal, std::slice::from_ref(t), &model, s)
    })
}

fn second_stage(
    scenario: &ScenarioSpec,
    variant: ModelVariant,
    animal: &[AnimalStudy],
    cfg: &SimulationConfig,
    grid: &DoseGrid,
    seed: u64,
    first: &TrialRecord,
) -> Result<TrialRecord> {
    let (t1, t2) = (&scenario.trials[0], &scenario.trials[1]);
    let model =
        variant.second_stage_config(&cfg.base, &t1.subgroup_id, &t2.subgroup_id, &cfg.animal_weights)?;
    let animal = if variant.uses_animal_data() { animal } else { &[] };
    let first_trial = HumanTrialState::new(
        t1.subgroup_id.clone(),
        grid.clone(),
        cfg.max_sample_size,
        cfg.cohort_size,
    )?
    .with_cohorts(first.cohorts.iter().copied())?;

    let humans = |t: &HumanTrialState| -> Result<Vec<HumanTrialState>> {
        Ok(match variant {
            ModelVariant::A | ModelVariant::B | ModelVariant::BRobust => {
                vec![first_trial.clone(), t.clone()]
            }
            ModelVariant::C | ModelVariant::D => vec![t.clone()],
            ModelVariant::E => vec![t.pooled_with(&first_trial)?],
        })
    };
    let fit = |t: &HumanTrialState, s: &SamplerSettings| run_posterior(animal, &humans(t)?, &model, s);

    let stage = Stage {
        cfg,
        grid,
        truth: &t2.true_p,
        replicate_seed: seed,
        trial_index: 1,
    };
    let start = if variant.conditions_second_start() {
        let empty = HumanTrialState::new(
            t2.subgroup_id.clone(),
            grid.clone(),
            cfg.max_sample_size,
            cfg.cohort_size,
        )?;
        let post = fit(&empty, &stage.fit_settings(0))?;
        starting_dose(&post, &t2.subgroup_id, &cfg.thresholds)?
            .dose_index
            .expect("start decisions carry a dose")
    } else {
        0
    };
    stage.run(&t2.subgroup_id, start, &fit)
}

fn check_inputs(scenario: &ScenarioSpec, cfg: &SimulationConfig) -> Result<DoseGrid> {
    scenario.validate()?;
    cfg.validate()?;
    for t in &scenario.trials {
        if cfg.base.subgroup_index(&t.subgroup_id).is_none() {
            return Err(Error::Config(format!(
                "scenario subgroup {} is not in the model configuration",
                t.subgroup_id
            )));
        }
    }
    DoseGrid::new(scenario.doses.clone(), cfg.base.reference_dose)
}

/// Simulates one pair of sequential trials: the first trial runs to
/// completion or a stop for safety, then the second starts from the
/// variant's co-data posterior (or the lowest dose).
pub fn simulate_trial_pair(
    scenario: &ScenarioSpec,
    variant: ModelVariant,
    animal: &[AnimalStudy],
    cfg: &SimulationConfig,
    master_seed: u64,
    replicate: usize,
) -> Result<PairRecord> {
    let grid = check_inputs(scenario, cfg)?;
    simulate_variants(scenario, &[variant], animal, cfg, &grid, master_seed, replicate)
        .map(|mut v| v.remove(0))
        .map_err(|e| Error::Replicate {
            replicate,
            source: Box::new(e),
        })
}

/// All variants for one replicate. First trials are shared between
/// variants whose first-stage configuration coincides (e.g. A and D), which
/// is exact because they use the same random streams.
fn simulate_variants(
    scenario: &ScenarioSpec,
    variants: &[ModelVariant],
    animal: &[AnimalStudy],
    cfg: &SimulationConfig,
    grid: &DoseGrid,
    master_seed: u64,
    replicate: usize,
) -> Result<Vec<PairRecord>> {
    let seed = replicate_seed(master_seed, replicate);
    let mut firsts: Vec<((ModelConfig, bool), TrialRecord)> = Vec::new();
    let mut out = Vec::with_capacity(variants.len());
    for &v in variants {
        let key = (
            v.first_stage_config(&cfg.base, &scenario.trials[0].subgroup_id, &cfg.animal_weights)?,
            v.uses_animal_data(),
        );
        let first = match firsts.iter().find(|(k, _)| *k == key) {
            Some((_, rec)) => rec.clone(),
            None => {
                let rec = first_stage(scenario, v, animal, cfg, grid, seed)?;
                firsts.push((key, rec.clone()));
                rec
            }
        };
        let second = second_stage(scenario, v, animal, cfg, grid, seed, &first)?;
        out.push(PairRecord {
            scenario: scenario.name.clone(),
            variant: v,
            replicate,
            seed,
            trials: vec![first, second],
        });
    }
    Ok(out)
}

/// Runs `n_replicates` pairs for every variant on the rayon pool. The
/// result is indexed `[variant][replicate]` and does not depend on
/// scheduling: each replicate derives its own streams from `master_seed`.
pub fn simulate_replicates(
    scenario: &ScenarioSpec,
    variants: &[ModelVariant],
    animal: &[AnimalStudy],
    cfg: &SimulationConfig,
    n_replicates: usize,
    master_seed: u64,
) -> Result<Vec<Vec<PairRecord>>> {
    let grid = check_inputs(scenario, cfg)?;
    let per_replicate: Vec<Vec<PairRecord>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            simulate_variants(scenario, variants, animal, cfg, &grid, master_seed, r).map_err(|e| {
                Error::Replicate {
                    replicate: r,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Vec<PairRecord>> = vec![Vec::with_capacity(n_replicates); variants.len()];
    for rep in per_replicate {
        for (v, rec) in rep.into_iter().enumerate() {
            out[v].push(rec);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_extremes() {
        let mut r = rng::stream(1, 0);
        assert_eq!(simulate_outcomes(0.0, 3, &mut r), 0);
        assert_eq!(simulate_outcomes(1.0, 3, &mut r), 3);
    }

    #[test]
    fn outcome_mean_matches_binomial() {
        let mut r = rng::stream(2, 0);
        let total: u64 = (0..100_000)
            .map(|_| simulate_outcomes(0.25, 3, &mut r) as u64)
            .sum();
        let mean = total as f64 / 100_000.0;
        assert!((mean - 0.75).abs() < 0.01, "mean {mean}");
    }

    fn record(doses: &[usize]) -> TrialRecord {
        TrialRecord {
            subgroup_id: "T1".into(),
            start_dose: doses[0],
            cohorts: doses
                .iter()
                .map(|d| Cohort { dose_index: *d, n_treated: 3, n_dlt: 0 })
                .collect(),
            decisions: vec![],
            outcome: TrialOutcome::Completed,
            mtd: None,
            epsilon_mean: 1.0,
            component_labels: vec![],
            component_frequencies: vec![],
        }
    }

    #[test]
    fn no_skipping_audit() {
        assert!(record(&[0, 1, 2, 2, 1, 2, 3]).respects_no_skipping());
        assert!(record(&[3, 4, 2, 5]).respects_no_skipping());
        assert!(!record(&[0, 2]).respects_no_skipping());
        assert!(!record(&[0, 1, 0, 3]).respects_no_skipping());
    }
}
