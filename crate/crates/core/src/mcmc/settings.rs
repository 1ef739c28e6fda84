use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterState;

/// Controls one posterior run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub n_chains: usize,
    /// Iterations per chain, burn-in included.
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Acceptance rate targeted for two-dimensional blocks.
    pub target_acceptance_block: f64,
    /// Acceptance rate targeted for scalar updates.
    pub target_acceptance_scalar: f64,
    /// Number of block updates before the empirical proposal covariance
    /// replaces the initial diagonal one.
    pub adaptation_warmup: usize,
    /// Cap on stored draws summed over chains. Running means and standard
    /// deviations always use every retained draw.
    pub max_stored_draws: usize,
    /// Compute split-R-hat and effective sample sizes.
    pub diagnostics: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            n_chains: 2,
            n_iterations: 15_000,
            n_burnin: 5_000,
            thinning: 1,
            seed: 20_240_601,
            target_acceptance_block: 0.30,
            target_acceptance_scalar: 0.44,
            adaptation_warmup: 200,
            max_stored_draws: 40_000,
            diagnostics: true,
        }
    }
}

impl SamplerSettings {
    /// The reduced budget used inside simulated trials: 2 chains of 6 000
    /// iterations with 2 000 burn-in, no diagnostics.
    pub fn simulation() -> Self {
        Self {
            n_iterations: 6_000,
            n_burnin: 2_000,
            diagnostics: false,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_iterations == 0 || self.thinning == 0 {
            return Err(Error::Config(
                "chains, iterations and thinning must be positive".into(),
            ));
        }
        if self.n_burnin >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.n_burnin, self.n_iterations
            )));
        }
        for t in [self.target_acceptance_block, self.target_acceptance_scalar] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("target acceptance {t} outside (0, 1)")));
            }
        }
        if self.max_stored_draws < self.n_chains {
            return Err(Error::Config("draw cap smaller than the number of chains".into()));
        }
        Ok(())
    }

    /// Retained draws per chain after burn-in and thinning.
    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations - self.n_burnin).div_ceil(self.thinning)
    }
}

/// Blocks held fixed at their initial values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrozenBlocks {
    /// mu_k, m, mu_H and every covariance parameter.
    pub hyperparameters: bool,
    /// delta_k and eps_l.
    pub translation: bool,
}

/// Options beyond the serializable settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Starting point used by every chain; otherwise chains start from
    /// jittered central values.
    pub initial: Option<ParameterState>,
    pub frozen: FrozenBlocks,
}
