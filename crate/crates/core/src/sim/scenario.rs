use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presets;

/// True DLT risks of one human subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub subgroup_id: String,
    pub true_p: Vec<f64>,
    /// Grid index counted as the correct MTD, if any.
    pub true_mtd: Option<usize>,
}

/// Truth for a pair of sequential trials on a shared dose grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub doses: Vec<f64>,
    pub trials: Vec<TrialTruth>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials.len() != 2 {
            return Err(Error::Config(format!(
                "scenario {} describes {} trials; the sequential design needs two",
                self.name,
                self.trials.len()
            )));
        }
        for t in &self.trials {
            if t.true_p.len() != self.doses.len() {
                return Err(Error::Config(format!(
                    "scenario {}: {} risks for {} doses in {}",
                    self.name,
                    t.true_p.len(),
                    self.doses.len(),
                    t.subgroup_id
                )));
            }
            if t.true_p.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return Err(Error::Config(format!(
                    "scenario {}: risks of {} must lie in (0, 1)",
                    self.name, t.subgroup_id
                )));
            }
            if t.true_p.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config(format!(
                    "scenario {}: risks of {} must not decrease with dose",
                    self.name, t.subgroup_id
                )));
            }
            if t.true_mtd.is_some_and(|j| j >= self.doses.len()) {
                return Err(Error::Config(format!(
                    "scenario {}: true MTD index of {} is off the grid",
                    self.name, t.subgroup_id
                )));
            }
        }
        if self.trials[0].subgroup_id == self.trials[1].subgroup_id {
            return Err(Error::Config(format!(
                "scenario {}: the two trials need distinct subgroup ids",
                self.name
            )));
        }
        Ok(())
    }

    pub fn truth(&self, subgroup_id: &str) -> Result<&TrialTruth> {
        self.trials
            .iter()
            .find(|t| t.subgroup_id == subgroup_id)
            .ok_or_else(|| Error::Config(format!("scenario has no subgroup {subgroup_id}")))
    }

    /// One of the six standard scenarios (1-based).
    pub fn standard(number: usize) -> Result<ScenarioSpec> {
        let (t1, m1, t2, m2): ([f64; 6], Option<usize>, [f64; 6], Option<usize>) = match number {
            1 => (
                [0.01, 0.03, 0.10, 0.25, 0.34, 0.47],
                Some(3),
                [0.01, 0.03, 0.10, 0.25, 0.34, 0.47],
                Some(3),
            ),
            2 => (
                [0.01, 0.03, 0.10, 0.25, 0.34, 0.47],
                Some(3),
                [0.05, 0.12, 0.25, 0.37, 0.50, 0.60],
                Some(2),
            ),
            3 => (
                [0.01, 0.03, 0.10, 0.25, 0.34, 0.47],
                Some(3),
                [0.01, 0.03, 0.07, 0.15, 0.25, 0.37],
                Some(4),
            ),
            4 => (
                [0.01, 0.03, 0.05, 0.08, 0.15, 0.25],
                Some(5),
                [0.02, 0.05, 0.07, 0.12, 0.25, 0.36],
                Some(4),
            ),
            5 => (
                [0.25, 0.34, 0.47, 0.55, 0.65, 0.75],
                Some(0),
                [0.40, 0.50, 0.60, 0.70, 0.80, 0.90],
                None,
            ),
            6 => (
                [0.01, 0.03, 0.05, 0.08, 0.15, 0.25],
                Some(5),
                [0.10, 0.25, 0.36, 0.50, 0.60, 0.68],
                Some(1),
            ),
            n => return Err(Error::Config(format!("no standard scenario {n}; use 1 to 6"))),
        };
        Ok(ScenarioSpec {
            name: format!("scenario {number}"),
            doses: presets::DOSES.to_vec(),
            trials: vec![
                TrialTruth {
                    subgroup_id: "T1".into(),
                    true_p: t1.to_vec(),
                    true_mtd: m1,
                },
                TrialTruth {
                    subgroup_id: "T2".into(),
                    true_p: t2.to_vec(),
                    true_mtd: m2,
                },
            ],
        })
    }
}
