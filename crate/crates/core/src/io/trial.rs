use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_versioned, write_json, DesignSettings, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::model::{Cohort, DoseGrid, HumanTrialState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    pub subgroup_id: String,
    #[serde(default)]
    pub cohorts: Vec<Cohort>,
}

/// Accrual of one or more human subgroups. `active` names the subgroup
/// whose next dose is recommended; it defaults to the last one listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<String>,
    pub trials: Vec<TrialEntry>,
}

/// Trial states on the configured grid and design.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub active: String,
    pub trials: Vec<HumanTrialState>,
}

impl TrialSet {
    pub fn active_trial(&self) -> &HumanTrialState {
        self.trials
            .iter()
            .find(|t| t.subgroup_id == self.active)
            .expect("active subgroup is validated on construction")
    }

    pub fn subgroup_ids(&self) -> Vec<&str> {
        self.trials.iter().map(|t| t.subgroup_id.as_str()).collect()
    }

    pub fn to_file(&self) -> TrialFile {
        TrialFile {
            schema_version: SCHEMA_VERSION.into(),
            active: Some(self.active.clone()),
            trials: self
                .trials
                .iter()
                .map(|t| TrialEntry {
                    subgroup_id: t.subgroup_id.clone(),
                    cohorts: t.cohorts().to_vec(),
                })
                .collect(),
        }
    }
}

impl TrialFile {
    pub fn to_trial_set(&self, grid: &DoseGrid, design: &DesignSettings) -> Result<TrialSet> {
        if self.trials.is_empty() {
            return Err(Error::InvalidData("trial file lists no subgroups".into()));
        }
        let trials = self
            .trials
            .iter()
            .map(|e| {
                HumanTrialState::new(
                    e.subgroup_id.clone(),
                    grid.clone(),
                    design.max_sample_size,
                    design.cohort_size,
                )?
                .with_cohorts(e.cohorts.iter().copied())
            })
            .collect::<Result<Vec<_>>>()?;
        let active = self
            .active
            .clone()
            .unwrap_or_else(|| trials.last().expect("non-empty").subgroup_id.clone());
        if !trials.iter().any(|t| t.subgroup_id == active) {
            return Err(Error::InvalidData(format!(
                "active subgroup {active} is not listed in the trial file"
            )));
        }
        Ok(TrialSet { active, trials })
    }
}

pub fn load_trial_state(path: &Path, grid: &DoseGrid, design: &DesignSettings) -> Result<TrialSet> {
    let file: TrialFile = read_versioned(path)?;
    file.to_trial_set(grid, design).map_err(|e| match e {
        Error::InvalidData(m) => Error::InvalidData(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_trial_state(path: &Path, trials: &TrialSet) -> Result<()> {
    write_json(path, &trials.to_file())
}
