//! Bayesian hierarchical dose-toxicity modelling for phase I dose escalation.
//!
//! Animal toxicology studies and one or more human subgroups share a
//! logistic dose-toxicity model. Each human subgroup borrows from the animal
//! species, from other human subgroups, or from nothing at all through an
//! exchangeability/non-exchangeability mixture, with uncertain dose
//! translation factors between species and between subgroups.

pub mod decision;
pub mod error;
pub mod io;
pub mod ess;
pub mod mcmc;
pub mod model;
pub mod presets;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
