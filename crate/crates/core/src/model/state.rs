use serde::{Deserialize, Serialize};

use super::config::{CovTriple, ModelConfig};

/// Index of a mixture component for a subgroup's parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    /// Exchangeable with the studies of animal species `k`.
    Species(usize),
    /// Exchangeable with the other human subgroups.
    Human,
    /// Non-exchangeable; own prior.
    Robust,
}

impl Component {
    pub fn index(self, n_species: usize) -> usize {
        match self {
            Component::Species(k) => k,
            Component::Human => n_species,
            Component::Robust => n_species + 1,
        }
    }

    pub fn from_index(index: usize, n_species: usize) -> Self {
        if index < n_species {
            Component::Species(index)
        } else if index == n_species {
            Component::Human
        } else {
            Component::Robust
        }
    }
}

/// One point in the parameter space of the full model.
///
/// Translation factors are stored through their standardized variates, as
/// the sampler moves on that scale: `delta_k = exp(loc_k + scale_k * z_k)` and
/// `eps_l = mean_l + sd_l * z_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    /// (intercept, log-slope) per animal study.
    pub theta: Vec<[f64; 2]>,
    /// Species-level means.
    pub mu_species: Vec<[f64; 2]>,
    /// Supra-species mean.
    pub m: [f64; 2],
    /// Mean of the human-only exchangeability distribution.
    pub mu_human: [f64; 2],
    /// (intercept, log-slope) per human subgroup.
    pub gamma: Vec<[f64; 2]>,
    pub indicator: Vec<Component>,
    pub delta_z: Vec<f64>,
    pub eps_z: Vec<f64>,
    /// tau_1..tau_4.
    pub tau: [f64; 4],
    /// sigma_1, sigma_2.
    pub sigma: [f64; 2],
    pub rho: f64,
    pub kappa: f64,
    pub eta: f64,
}

impl ParameterState {
    /// Within-species covariance (Psi).
    pub fn psi(&self) -> CovTriple {
        CovTriple::new(self.tau[0], self.tau[1], self.rho)
    }

    /// Supra-species covariance (Sigma).
    pub fn sigma_cov(&self) -> CovTriple {
        CovTriple::new(self.sigma[0], self.sigma[1], self.kappa)
    }

    /// Human-only covariance (Phi).
    pub fn phi(&self) -> CovTriple {
        CovTriple::new(self.tau[2], self.tau[3], self.eta)
    }

    pub fn log_delta(&self, config: &ModelConfig, k: usize) -> f64 {
        let t = &config.translation.species[k];
        t.log_location + t.log_scale * self.delta_z[k]
    }

    pub fn delta(&self, config: &ModelConfig, k: usize) -> f64 {
        self.log_delta(config, k).exp()
    }

    pub fn epsilon(&self, config: &ModelConfig, l: usize) -> f64 {
        config.translation.epsilon[l].value(self.eps_z[l])
    }

    /// A central state: all locations at their prior means, standard
    /// deviations at their half-normal scales, correlations zero.
    pub fn central(config: &ModelConfig, species_of_study: &[usize]) -> Self {
        let h = &config.hyper;
        let centre = [h.mean_intercept.mean, h.mean_log_slope.mean];
        let k = config.n_species();
        let l = config.n_subgroups();
        let indicator = config
            .weights
            .iter()
            .map(|w| {
                let v = w.as_vec();
                let best = (0..v.len())
                    .max_by(|a, b| v[*a].total_cmp(&v[*b]).then(b.cmp(a)))
                    .unwrap_or(k + 1);
                Component::from_index(best, k)
            })
            .collect();
        Self {
            theta: vec![centre; species_of_study.len()],
            mu_species: vec![centre; k],
            m: centre,
            mu_human: centre,
            gamma: config.nex.iter().map(|n| n.mean).collect(),
            indicator,
            delta_z: vec![0.0; k],
            eps_z: vec![0.0; l],
            tau: h.tau_scales,
            sigma: h.sigma_scales,
            rho: 0.0,
            kappa: 0.0,
            eta: 0.0,
        }
    }
}
