use serde::{Deserialize, Serialize};

use super::scenario::ScenarioSpec;
use super::trial::PairRecord;
use super::variant::ModelVariant;
use crate::error::{Error, Result};

/// Operating characteristics of one subgroup across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupCharacteristics {
    pub subgroup_id: String,
    pub true_mtd: Option<usize>,
    pub pct_stopped_early: f64,
    /// Percentage of replicates declaring each dose the MTD.
    pub pct_mtd: Vec<f64>,
    /// Completed trials that declared no MTD. With the early stops and the
    /// per-dose MTD percentages this partitions the replicates.
    pub pct_no_mtd: f64,
    /// Probability of correct selection: the true MTD, or no MTD when none
    /// exists.
    pub pcs: f64,
    /// Percentage that stopped early or declared no MTD above the lowest dose.
    pub pct_stop_or_lowest: f64,
    pub mean_patients: Vec<f64>,
    pub mean_total_patients: f64,
    pub mean_dlts: f64,
    /// Mean posterior bridging factor over completed trials.
    pub mean_epsilon_completed: Option<f64>,
    pub no_skipping_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcReport {
    pub scenario: String,
    pub variant: ModelVariant,
    pub n_replicates: usize,
    pub subgroups: Vec<SubgroupCharacteristics>,
}

/// Mean that does not depend on the order of `xs`.
fn stable_mean(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

fn pct(count: usize, n: usize) -> f64 {
    100.0 * count as f64 / n as f64
}

/// Summarises the replicates of one scenario and variant.
pub fn operating_characteristics(
    scenario: &ScenarioSpec,
    records: &[PairRecord],
) -> Result<OcReport> {
    let first = records
        .first()
        .ok_or_else(|| Error::State("no replicates to summarise".into()))?;
    if records
        .iter()
        .any(|r| r.variant != first.variant || r.scenario != scenario.name)
    {
        return Err(Error::State(
            "replicates mix scenarios or model variants".into(),
        ));
    }
    let n = records.len();
    let n_doses = scenario.doses.len();
    let mut subgroups = Vec::with_capacity(scenario.trials.len());
    for (t, truth) in scenario.trials.iter().enumerate() {
        let trials: Vec<_> = records
            .iter()
            .map(|r| {
                r.trials
                    .get(t)
                    .filter(|rec| rec.subgroup_id == truth.subgroup_id)
                    .ok_or_else(|| {
                        Error::State(format!(
                            "replicate {} lacks subgroup {}",
                            r.replicate, truth.subgroup_id
                        ))
                    })
            })
            .collect::<Result<_>>()?;

        let stopped = trials.iter().filter(|r| !r.completed()).count();
        let mut mtd_counts = vec![0usize; n_doses];
        for r in &trials {
            if let Some(j) = r.mtd {
                mtd_counts[j] += 1;
            }
        }
        let no_mtd = trials.iter().filter(|r| r.completed() && r.mtd.is_none()).count();
        let correct = match truth.true_mtd {
            Some(j) => mtd_counts[j],
            None => stopped + no_mtd,
        };
        let stop_or_lowest = trials.iter().filter(|r| r.mtd.is_none_or(|j| j == 0)).count();

        let mut patients = vec![0u64; n_doses];
        let mut dlts = 0u64;
        for r in &trials {
            for (acc, x) in patients.iter_mut().zip(r.patients_per_dose(n_doses)) {
                *acc += x as u64;
            }
            dlts += r.total_dlts() as u64;
        }
        let total: u64 = patients.iter().sum();

        subgroups.push(SubgroupCharacteristics {
            subgroup_id: truth.subgroup_id.clone(),
            true_mtd: truth.true_mtd,
            pct_stopped_early: pct(stopped, n),
            pct_mtd: mtd_counts.iter().map(|c| pct(*c, n)).collect(),
            pct_no_mtd: pct(no_mtd, n),
            pcs: pct(correct, n),
            pct_stop_or_lowest: pct(stop_or_lowest, n),
            mean_patients: patients.iter().map(|p| *p as f64 / n as f64).collect(),
            mean_total_patients: total as f64 / n as f64,
            mean_dlts: dlts as f64 / n as f64,
            mean_epsilon_completed: stable_mean(
                trials
                    .iter()
                    .filter(|r| r.completed())
                    .map(|r| r.epsilon_mean)
                    .collect(),
            ),
            no_skipping_violations: trials.iter().filter(|r| !r.respects_no_skipping()).count(),
        });
    }
    Ok(OcReport {
        scenario: scenario.name.clone(),
        variant: first.variant,
        n_replicates: n,
        subgroups,
    })
}
