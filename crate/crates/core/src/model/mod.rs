//! Domain types and the joint log-density of the hierarchical model.
//!
//! Animal study `i` of species `k` has DLT probabilities
//! `logit p_ij = theta_1i + exp(theta_2i) * ln(delta_k * d_ij / d_ref)`, with
//! `theta_i ~ BVN(mu_k, Psi)` and `mu_k ~ BVN(m, Sigma)`. Human subgroup `l`
//! uses `logit p_lj = gamma_1l + exp(gamma_2l) * ln(eps_l * d_lj / d_ref)` and
//! `gamma_l` is drawn from a mixture: `BVN(mu_k, Psi)` for each species,
//! `BVN(mu_H, Phi)` for the human-only population, or its own
//! `BVN(m_0l, R_0l)`.

mod config;
mod data;
pub(crate) mod density;
mod state;

pub use config::{
    CovTriple, EpsilonPrior, HyperpriorConfig, MixtureWeights, ModelConfig, NexPrior,
    NormalPrior, SpeciesTranslation, TranslationPriors,
};
pub use data::{AnimalStudy, Cohort, DoseGrid, HumanTrialState};
pub use density::{ln_bvn, log_joint_density, logistic, tox_prob, LogDensityTerms, Problem};
pub use state::{Component, ParameterState};
