//! Posterior sampling, predictive priors and convergence diagnostics.

mod diagnostics;
mod indicator;
mod predictive;
mod result;
mod sampler;
mod settings;

pub use diagnostics::{diagnose, effective_sample_size, split_r_hat, ParameterDiagnostic};
pub use indicator::{indicator_probabilities, sample_mixture_indicator};
pub use predictive::prior_predictive;
pub use result::{
    quantile, BlockAcceptance, DoseSummary, PosteriorResult, QuantileSummary, RunningSummary,
    SubgroupPosterior, SubgroupSummary,
};
pub use sampler::{run_posterior, run_posterior_with};
pub use settings::{FrozenBlocks, RunOptions, SamplerSettings};
