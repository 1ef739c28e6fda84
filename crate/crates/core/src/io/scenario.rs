use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_versioned, write_json, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::sim::{operating_characteristics, ModelVariant, OcReport, PairRecord, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: String,
    pub scenarios: Vec<ScenarioSpec>,
}

/// Loads and validates every scenario of a file.
pub fn load_scenarios(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let file: ScenarioFile = read_versioned(path)?;
    if file.scenarios.is_empty() {
        return Err(Error::Config(format!("{}: no scenarios", path.display())));
    }
    for s in &file.scenarios {
        s.validate()?;
    }
    Ok(file.scenarios)
}

pub fn write_scenarios(path: &Path, scenarios: &[ScenarioSpec]) -> Result<()> {
    write_json(
        path,
        &ScenarioFile {
            schema_version: SCHEMA_VERSION.into(),
            scenarios: scenarios.to_vec(),
        },
    )
}

/// Per-replicate records of one scenario and variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationRecords {
    pub schema_version: String,
    pub scenario: ScenarioSpec,
    pub variant: ModelVariant,
    pub master_seed: u64,
    pub records: Vec<PairRecord>,
}

impl SimulationRecords {
    pub fn new(scenario: &ScenarioSpec, variant: ModelVariant, master_seed: u64, records: Vec<PairRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            scenario: scenario.clone(),
            variant,
            master_seed,
            records,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_versioned(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn operating_characteristics(&self) -> Result<OcReport> {
        operating_characteristics(&self.scenario, &self.records)
    }
}
