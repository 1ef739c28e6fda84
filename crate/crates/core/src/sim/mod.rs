//! Simulation of sequential trial pairs and their operating characteristics.

mod report;
mod scenario;
mod trial;
mod variant;

pub use report::{operating_characteristics, OcReport, SubgroupCharacteristics};
pub use scenario::{ScenarioSpec, TrialTruth};
pub use trial::{
    simulate_outcomes, simulate_replicates, simulate_trial_pair, PairRecord, SimulationConfig,
    TrialOutcome, TrialRecord,
};
pub use variant::ModelVariant;
