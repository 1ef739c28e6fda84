//! File formats, run manifests and report rendering shared by the command
//! line and the conduct service.
//!
//! Every persisted JSON artifact carries a `schema_version` string of the form
//! `MAJOR.MINOR`; loaders accept any minor version of a known major version.

mod animal;
mod config;
mod manifest;
mod report;
mod scenario;
mod trial;

pub use animal::{animal_csv_string, load_animal_data, read_animal_data, write_animal_data};
pub use config::{
    load_config, ConfigFile, DesignSettings, RunConfig, SimulationSection, SubgroupEntry,
    WeightsEntry, CONFIG_ENV,
};
pub use manifest::{sha256_file, sha256_hex, OutputFile, RunManifest, ENGINE_VERSION};
pub use report::{
    format_posterior_report, format_simulation_report, posterior_report, recommendation_json,
    recommendation_report, round4, ComponentWeight, DoseRow, EpsilonSummary, IntervalRow,
    PosteriorReport, RecommendationReport, SubgroupReport,
};
pub use scenario::{load_scenarios, write_scenarios, ScenarioFile, SimulationRecords};
pub use trial::{load_trial_state, write_trial_state, TrialEntry, TrialFile, TrialSet};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0";
const SCHEMA_MAJOR: u64 = 1;

/// Rejects versions whose major component differs from this build's.
pub fn check_schema_version(version: &str, path: &str) -> Result<()> {
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.trim().parse::<u64>().ok())
        .ok_or_else(|| Error::Parse {
            path: path.into(),
            message: format!("malformed schema_version {version:?}"),
        })?;
    if major != SCHEMA_MAJOR {
        return Err(Error::Parse {
            path: path.into(),
            message: format!(
                "unsupported schema_version {version}; this build reads {SCHEMA_MAJOR}.x"
            ),
        });
    }
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses JSON, reporting the location of the first schema violation as a
/// dotted path such as `subgroups[1].weights.human`.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, path: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        Error::Parse {
            path: if at == "." { path.into() } else { format!("{path}: {at}") },
            message: e.into_inner().to_string(),
        }
    })
}

/// Reads the `schema_version` field before the full parse so that files
/// from an unknown major version fail with a version error.
pub(crate) fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let shown = path.display().to_string();
    let text = read_text(path)?;
    #[derive(serde::Deserialize)]
    struct Probe {
        schema_version: Option<String>,
    }
    let probe: Probe = parse_json(&text, &shown)?;
    let version = probe.schema_version.ok_or_else(|| Error::Parse {
        path: shown.clone(),
        message: "missing schema_version".into(),
    })?;
    check_schema_version(&version, &shown)?;
    parse_json(&text, &shown)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: "<serialize>".into(),
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_major_versions() {
        check_schema_version("1.0", "f").unwrap();
        check_schema_version("1.7", "f").unwrap();
        assert!(check_schema_version("2.0", "f").is_err());
        assert!(check_schema_version("x", "f").is_err());
    }

    #[test]
    fn parse_errors_name_the_field() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Inner {
            x: f64,
        }
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Outer {
            items: Vec<Inner>,
        }
        let err = parse_json::<Outer>(r#"{"items":[{"x":1},{"x":"a"}]}"#, "c.json").unwrap_err();
        assert!(err.to_string().contains("items[1].x"), "{err}");
    }
}
