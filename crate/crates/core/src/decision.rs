//! Dose-escalation rules driven by posterior interval probabilities.
//!
//! Each dose is classed by its DLT risk as under-dosing (`p < 0.16`), target
//! (`0.16 <= p < 0.33`) or over-dosing (`p >= 0.33`). The next cohort gets the
//! highest dose whose over-dosing probability is at most the feasibility
//! bound, never more than one level above the highest dose given so far when
//! no-skipping applies. The trial stops for safety when the lowest dose fails
//! that bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{PosteriorResult, QuantileSummary};
use crate::model::HumanTrialState;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalThresholds {
    pub underdose_cut: f64,
    pub overdose_cut: f64,
    pub target: f64,
    /// Maximum admissible posterior probability of over-dosing.
    pub feasibility_bound: f64,
    /// Required posterior probability of under-dosing for a starting dose.
    pub start_confidence: f64,
}

impl Default for IntervalThresholds {
    fn default() -> Self {
        Self {
            underdose_cut: 0.16,
            overdose_cut: 0.33,
            target: 0.25,
            feasibility_bound: 0.25,
            start_confidence: 0.85,
        }
    }
}

impl IntervalThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.underdose_cut
            && self.underdose_cut < self.overdose_cut
            && self.overdose_cut < 1.0
            && self.target >= self.underdose_cut
            && self.target < self.overdose_cut
            && (0.0..=1.0).contains(&self.feasibility_bound)
            && (0.0..=1.0).contains(&self.start_confidence);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent interval thresholds {self:?}")))
        }
    }
}

/// Posterior probabilities of the three DLT-risk intervals at one dose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProbabilities {
    pub under: f64,
    pub target: f64,
    pub over: f64,
}

/// Empirical interval probabilities of a set of DLT-probability draws. The
/// three values are counts over a common denominator, so they sum to one.
pub fn interval_probabilities(
    draws: &[f64],
    thresholds: &IntervalThresholds,
) -> Result<IntervalProbabilities> {
    if draws.is_empty() {
        return Err(Error::InvalidData("no posterior draws".into()));
    }
    let (mut under, mut over) = (0usize, 0usize);
    for p in draws {
        if *p < thresholds.underdose_cut {
            under += 1;
        } else if *p >= thresholds.overdose_cut {
            over += 1;
        }
    }
    let target = draws.len() - under - over;
    let n = draws.len() as f64;
    Ok(IntervalProbabilities {
        under: under as f64 / n,
        target: target as f64 / n,
        over: over as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Start,
    EscalateTo,
    Stay,
    DeEscalateTo,
    StopForSafety,
    Complete,
}

impl DecisionKind {
    pub fn is_dosing(self) -> bool {
        matches!(
            self,
            DecisionKind::Start
                | DecisionKind::EscalateTo
                | DecisionKind::Stay
                | DecisionKind::DeEscalateTo
        )
    }
}

/// A dosing decision and the per-dose interval probabilities behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseDecision {
    pub kind: DecisionKind,
    pub dose_index: Option<usize>,
    pub rationale: Vec<IntervalProbabilities>,
}

impl DoseDecision {
    fn dosing(kind: DecisionKind, dose_index: usize, rationale: Vec<IntervalProbabilities>) -> Self {
        Self {
            kind,
            dose_index: Some(dose_index),
            rationale,
        }
    }
}

/// Interval probabilities at every grid dose of the trial's subgroup.
pub fn dose_profile(
    posterior: &PosteriorResult,
    subgroup_id: &str,
    n_doses: usize,
    thresholds: &IntervalThresholds,
) -> Result<Vec<IntervalProbabilities>> {
    let sub = posterior.subgroup(subgroup_id)?;
    (0..n_doses)
        .map(|j| interval_probabilities(sub.tox_draws_at(j)?, thresholds))
        .collect()
}

/// Rule layer of [`recommend_next_dose`] on precomputed interval probabilities.
pub fn recommend_from_profile(
    profile: Vec<IntervalProbabilities>,
    trial: &HumanTrialState,
    thresholds: &IntervalThresholds,
    no_skipping: bool,
) -> Result<DoseDecision> {
    let Some(current) = trial.current_dose() else {
        return Err(Error::State(
            "no cohort completed yet; use the starting-dose rule".into(),
        ));
    };
    if trial.is_complete() {
        return Ok(DoseDecision {
            kind: DecisionKind::Complete,
            dose_index: None,
            rationale: profile,
        });
    }
    let admissible = |ip: &IntervalProbabilities| ip.over <= thresholds.feasibility_bound;
    if profile.first().is_none_or(|ip| !admissible(ip)) {
        return Ok(DoseDecision {
            kind: DecisionKind::StopForSafety,
            dose_index: None,
            rationale: profile,
        });
    }
    let cap = if no_skipping {
        trial.highest_administered().unwrap_or(current) + 1
    } else {
        profile.len() - 1
    };
    let next = profile[..=cap.min(profile.len() - 1)]
        .iter()
        .rposition(admissible)
        .expect("lowest dose is admissible");
    let kind = match next.cmp(&current) {
        std::cmp::Ordering::Greater => DecisionKind::EscalateTo,
        std::cmp::Ordering::Equal => DecisionKind::Stay,
        std::cmp::Ordering::Less => DecisionKind::DeEscalateTo,
    };
    Ok(DoseDecision::dosing(kind, next, profile))
}

/// Dose for the next cohort of `trial`.
pub fn recommend_next_dose(
    posterior: &PosteriorResult,
    trial: &HumanTrialState,
    thresholds: &IntervalThresholds,
    no_skipping: bool,
) -> Result<DoseDecision> {
    let profile = dose_profile(posterior, &trial.subgroup_id, trial.grid().len(), thresholds)?;
    recommend_from_profile(profile, trial, thresholds, no_skipping)
}

/// Rule layer of [`starting_dose`]: highest dose whose under-dosing
/// probability exceeds the start confidence, else the lowest dose.
pub fn starting_dose_from_profile(
    profile: Vec<IntervalProbabilities>,
    thresholds: &IntervalThresholds,
) -> DoseDecision {
    let start = profile
        .iter()
        .rposition(|ip| ip.under > thresholds.start_confidence)
        .unwrap_or(0);
    DoseDecision::dosing(DecisionKind::Start, start, profile)
}

/// Starting dose for a subgroup from a prior or co-data posterior.
pub fn starting_dose(
    posterior: &PosteriorResult,
    subgroup_id: &str,
    thresholds: &IntervalThresholds,
) -> Result<DoseDecision> {
    let n = posterior.subgroup(subgroup_id)?.doses.len();
    let profile = dose_profile(posterior, subgroup_id, n, thresholds)?;
    Ok(starting_dose_from_profile(profile, thresholds))
}

/// Rule layer of [`declare_mtd`]: among administered doses meeting the
/// over-dosing criterion, the one whose median DLT risk is closest to the
/// target, ties going to the lower dose.
pub fn mtd_from_summaries(
    medians: &[f64],
    profile: &[IntervalProbabilities],
    administered: &[bool],
    thresholds: &IntervalThresholds,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..medians.len() {
        if !administered[j] || profile[j].over > thresholds.feasibility_bound {
            continue;
        }
        let dist = (medians[j] - thresholds.target).abs();
        match best {
            Some((_, d)) if dist >= d - TIE_TOLERANCE => {}
            _ => best = Some((j, dist)),
        }
    }
    best.map(|(j, _)| j)
}

/// Maximum tolerated dose at the end of a completed trial, if any.
pub fn declare_mtd(
    posterior: &PosteriorResult,
    trial: &HumanTrialState,
    thresholds: &IntervalThresholds,
) -> Result<Option<usize>> {
    if !trial.is_complete() {
        return Err(Error::State(format!(
            "trial {} has {} of {} patients; an MTD is only declared on completion",
            trial.subgroup_id,
            trial.total_treated(),
            trial.max_sample_size()
        )));
    }
    let sub = posterior.subgroup(&trial.subgroup_id)?;
    let n = trial.grid().len();
    let profile = dose_profile(posterior, &trial.subgroup_id, n, thresholds)?;
    let medians: Vec<f64> = (0..n)
        .map(|j| Ok(QuantileSummary::from_draws(sub.tox_draws_at(j)?).median))
        .collect::<Result<_>>()?;
    Ok(mtd_from_summaries(
        &medians,
        &profile,
        &trial.administered(),
        thresholds,
    ))
}
