use serde::{Deserialize, Serialize};

use exnex_core::decision::DecisionKind;
use exnex_core::io::{
    posterior_report, read_animal_data, recommendation_json, ConfigFile, PosteriorReport,
    RecommendationReport, RunConfig, TrialEntry, TrialFile, TrialSet, SCHEMA_VERSION,
};
use exnex_core::model::{AnimalStudy, Cohort};
use exnex_core::Error;

/// Request body of `POST /v1/trials`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTrial {
    /// Sampler seed for every fit of the session; the service default when
    /// absent.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Subgroup whose doses the session recommends; defaults to the last.
    #[serde(default)]
    pub active: Option<String>,
    /// Every subgroup in the analysis, co-data trials with their cohorts.
    pub trials: Vec<TrialEntry>,
    /// Animal data as CSV text; the service default when absent.
    #[serde(default)]
    pub animal_csv: Option<String>,
    /// Full configuration; the service default when absent.
    #[serde(default)]
    pub config: Option<ConfigFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    /// The creation request with every default resolved.
    Created { request: CreateTrial },
    CohortAdded {
        subgroup_id: String,
        cohort: Cohort,
        /// The cohort was treated at a dose other than the recommended one.
        #[serde(default)]
        overridden: bool,
    },
}

/// Request body of `POST /v1/trials/{id}/cohorts`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmitCohort {
    #[serde(flatten)]
    pub cohort: Cohort,
    /// Accept a dose other than the current recommendation.
    #[serde(default, rename = "override")]
    pub override_recommendation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: usize,
    pub recorded_at: String,
    #[serde(flatten)]
    pub event: LogEvent,
    /// Decision issued after the event.
    pub decision: DecisionKind,
    pub dose_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub schema_version: String,
    pub session_id: String,
    pub entries: Vec<LogEntry>,
}

/// Server-wide defaults applied to creation requests.
#[derive(Debug, Clone)]
pub struct Defaults {
    pub config: ConfigFile,
    pub animal_csv: String,
    pub seed: u64,
}

/// Immutable snapshot of a conduct session. Updates build a new snapshot,
/// so a failed fit leaves the previous one untouched.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    pub run: RunConfig,
    pub animal: Vec<AnimalStudy>,
    pub trials: TrialSet,
    pub posterior: PosteriorReport,
    pub recommendation: RecommendationReport,
    /// Canonical bytes of `recommendation`.
    pub recommendation_json: String,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Serialize)]
pub struct WhatIf {
    pub posterior: PosteriorReport,
    pub recommendation: RecommendationReport,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct Fitted {
    posterior: PosteriorReport,
    recommendation: RecommendationReport,
    json: String,
}

fn fit(run: &RunConfig, animal: &[AnimalStudy], set: &TrialSet, seed: u64) -> Result<Fitted, Error> {
    let (post, recommendation) = run.recommend(animal, set, seed)?;
    Ok(Fitted {
        posterior: posterior_report(&post, &set.trials, &run.thresholds)?,
        json: recommendation_json(&recommendation)?,
        recommendation,
    })
}

impl Session {
    /// Resolves defaults, fits the initial state and records the creation.
    pub fn create(id: String, defaults: &Defaults, mut req: CreateTrial) -> Result<Session, Error> {
        req.seed.get_or_insert(defaults.seed);
        req.config.get_or_insert_with(|| defaults.config.clone());
        req.animal_csv.get_or_insert_with(|| defaults.animal_csv.clone());
        let config = req.config.as_ref().expect("resolved");
        let run = config.to_run_config()?;
        let animal = read_animal_data(
            req.animal_csv.as_deref().expect("resolved"),
            "animal_csv",
            run.model.reference_dose,
        )?;
        let file = TrialFile {
            schema_version: SCHEMA_VERSION.into(),
            active: req.active.clone(),
            trials: req.trials.clone(),
        };
        let trials = file.to_trial_set(&run.grid, &run.design)?;
        req.active = Some(trials.active.clone());
        let seed = req.seed.expect("resolved");
        let f = fit(&run, &animal, &trials, seed)?;
        let entry = LogEntry {
            seq: 0,
            recorded_at: now(),
            event: LogEvent::Created { request: req },
            decision: f.recommendation.decision,
            dose_index: f.recommendation.dose_index,
        };
        Ok(Session {
            id,
            seed,
            run,
            animal,
            trials,
            posterior: f.posterior,
            recommendation: f.recommendation,
            recommendation_json: f.json,
            log: vec![entry],
        })
    }

    fn is_closed(&self) -> bool {
        matches!(
            self.recommendation.decision,
            DecisionKind::StopForSafety | DecisionKind::Complete
        )
    }

    fn with_cohorts(&self, cohorts: &[Cohort]) -> Result<TrialSet, Error> {
        if self.is_closed() {
            return Err(Error::State(format!(
                "trial {} is closed ({:?}); no further cohorts",
                self.trials.active, self.recommendation.decision
            )));
        }
        let mut set = self.trials.clone();
        let active = set
            .trials
            .iter_mut()
            .find(|t| t.subgroup_id == set.active)
            .expect("active subgroup exists");
        for c in cohorts {
            active.push_cohort(*c)?;
        }
        Ok(set)
    }

    /// The session after one more cohort of the active subgroup. A dose
    /// other than the recommended one needs `override_recommendation`.
    pub fn add_cohort(&self, submit: SubmitCohort) -> Result<Session, Error> {
        let SubmitCohort { cohort, override_recommendation } = submit;
        let recommended = self.recommendation.dose_index;
        let overridden = recommended.is_some_and(|d| d != cohort.dose_index);
        if overridden && !override_recommendation {
            return Err(Error::State(format!(
                "cohort dose index {} differs from the recommended {}; set override to accept it",
                cohort.dose_index,
                recommended.expect("checked")
            )));
        }
        let trials = self.with_cohorts(&[cohort])?;
        let f = fit(&self.run, &self.animal, &trials, self.seed)?;
        let mut log = self.log.clone();
        log.push(LogEntry {
            seq: log.len(),
            recorded_at: now(),
            event: LogEvent::CohortAdded {
                subgroup_id: trials.active.clone(),
                cohort,
                overridden,
            },
            decision: f.recommendation.decision,
            dose_index: f.recommendation.dose_index,
        });
        Ok(Session {
            trials,
            posterior: f.posterior,
            recommendation: f.recommendation,
            recommendation_json: f.json,
            log,
            ..self.clone()
        })
    }

    /// Projection after hypothetical cohorts; the session is not changed.
    pub fn what_if(&self, cohorts: &[Cohort]) -> Result<WhatIf, Error> {
        let trials = self.with_cohorts(cohorts)?;
        let f = fit(&self.run, &self.animal, &trials, self.seed)?;
        Ok(WhatIf {
            posterior: f.posterior,
            recommendation: f.recommendation,
        })
    }

    pub fn decision_log(&self) -> DecisionLog {
        DecisionLog {
            schema_version: SCHEMA_VERSION.into(),
            session_id: self.id.clone(),
            entries: self.log.clone(),
        }
    }

    /// Rebuilds a session from its decision log and checks that every
    /// recorded decision is reproduced.
    pub fn replay(id: String, defaults: &Defaults, log: &DecisionLog) -> Result<Session, Error> {
        let mut entries = log.entries.iter();
        let Some(LogEntry {
            event: LogEvent::Created { request },
            ..
        }) = entries.next()
        else {
            return Err(Error::InvalidData(
                "decision log must start with a creation event".into(),
            ));
        };
        let mut session = Session::create(id, defaults, request.clone())?;
        check_replayed(&session, &log.entries[0])?;
        for e in entries {
            let LogEvent::CohortAdded { subgroup_id, cohort, overridden } = &e.event else {
                return Err(Error::InvalidData(format!(
                    "log entry {} repeats the creation event",
                    e.seq
                )));
            };
            if *subgroup_id != session.trials.active {
                return Err(Error::InvalidData(format!(
                    "log entry {} adds to {subgroup_id}, not the active subgroup",
                    e.seq
                )));
            }
            session = session.add_cohort(SubmitCohort {
                cohort: *cohort,
                override_recommendation: *overridden,
            })?;
            check_replayed(&session, e)?;
        }
        Ok(session)
    }
}

fn check_replayed(session: &Session, entry: &LogEntry) -> Result<(), Error> {
    let r = &session.recommendation;
    if r.decision != entry.decision || r.dose_index != entry.dose_index {
        return Err(Error::State(format!(
            "replay diverged at entry {}: logged {:?} {:?}, recomputed {:?} {:?}",
            entry.seq, entry.decision, entry.dose_index, r.decision, r.dose_index
        )));
    }
    Ok(())
}
