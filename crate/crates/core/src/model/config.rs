use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2x2 covariance stored as two standard deviations and a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovTriple {
    pub sd1: f64,
    pub sd2: f64,
    pub corr: f64,
}

impl CovTriple {
    pub const fn new(sd1: f64, sd2: f64, corr: f64) -> Self {
        Self { sd1, sd2, corr }
    }

    pub fn is_valid(&self) -> bool {
        self.sd1 > 0.0
            && self.sd2 > 0.0
            && self.corr.abs() < 1.0
            && self.sd1.is_finite()
            && self.sd2.is_finite()
    }
}

/// Normal prior given by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

/// Bivariate normal prior of the non-exchangeable component for one subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NexPrior {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    /// Fixed at zero by default; kept configurable.
    #[serde(default)]
    pub corr: f64,
}

impl NexPrior {
    pub fn cov(&self) -> CovTriple {
        CovTriple::new(self.sd[0], self.sd[1], self.corr)
    }
}

impl Default for NexPrior {
    fn default() -> Self {
        Self {
            mean: [-1.099, 0.0],
            sd: [2.0, 1.0],
            corr: 0.0,
        }
    }
}

/// Priors on the hyperparameters of the random-effects layers.
///
/// `tau_scales` are the half-normal scales of tau_1..tau_4 (tau_1, tau_2 for
/// the within-species covariance, tau_3, tau_4 for the human-only covariance);
/// `sigma_scales` those of sigma_1, sigma_2 for the supra-species covariance.
/// The correlations rho, kappa, eta are uniform on `corr_bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperpriorConfig {
    pub mean_intercept: NormalPrior,
    pub mean_log_slope: NormalPrior,
    pub tau_scales: [f64; 4],
    pub sigma_scales: [f64; 2],
    pub corr_bounds: (f64, f64),
    /// Hard bounds on the intercept and log-slope population means.
    pub location_bounds: [(f64, f64); 2],
    /// Lower floor for every standard deviation.
    pub sd_floor: f64,
}

impl Default for HyperpriorConfig {
    fn default() -> Self {
        Self {
            mean_intercept: NormalPrior { mean: -1.099, sd: 1.98 },
            mean_log_slope: NormalPrior { mean: 0.0, sd: 0.99 },
            tau_scales: [0.5, 0.25, 0.25, 0.125],
            sigma_scales: [1.0, 0.5],
            corr_bounds: (-1.0, 1.0),
            location_bounds: [(-10.0, 10.0), (-5.0, 5.0)],
            sd_floor: 0.001,
        }
    }
}

impl HyperpriorConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = self
            .tau_scales
            .iter()
            .chain(self.sigma_scales.iter())
            .chain([&self.mean_intercept.sd, &self.mean_log_slope.sd]);
        for s in scales {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("prior scale {s} must be positive")));
            }
        }
        let (lo, hi) = self.corr_bounds;
        if !(-1.0..=1.0).contains(&lo) || !(-1.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::Config(format!(
                "correlation bounds ({lo}, {hi}) must lie within [-1, 1]"
            )));
        }
        for (lo, hi) in self.location_bounds {
            if lo >= hi {
                return Err(Error::Config(format!("empty location bound ({lo}, {hi})")));
            }
        }
        if !(self.sd_floor >= 0.0) {
            return Err(Error::Config("sd floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Log-normal prior of an animal-to-human translation factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesTranslation {
    pub species: String,
    pub log_location: f64,
    pub log_scale: f64,
}

/// Truncated normal prior of a subgroup bridging factor: N(mean, sd^2)
/// restricted to (0, upper).
///
/// With `upper = 2 * mean` the support is symmetric about the mean. When
/// `fixed` is set the factor is held at `mean` and never sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPrior {
    pub mean: f64,
    pub sd: f64,
    pub upper: f64,
    #[serde(default)]
    pub fixed: bool,
}

impl Default for EpsilonPrior {
    fn default() -> Self {
        Self {
            mean: 1.0,
            sd: 0.255,
            upper: 2.0,
            fixed: false,
        }
    }
}

impl EpsilonPrior {
    /// Bounds of the standardized variate `(eps - mean) / sd`.
    pub fn standardized_bounds(&self) -> (f64, f64) {
        (-self.mean / self.sd, (self.upper - self.mean) / self.sd)
    }

    pub fn value(&self, z: f64) -> f64 {
        if self.fixed {
            self.mean
        } else {
            self.mean + self.sd * z
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationPriors {
    pub species: Vec<SpeciesTranslation>,
    pub epsilon: Vec<EpsilonPrior>,
}

impl TranslationPriors {
    pub fn validate(&self) -> Result<()> {
        for s in &self.species {
            if !(s.log_scale > 0.0) {
                return Err(Error::Config(format!(
                    "translation scale for {} must be positive",
                    s.species
                )));
            }
        }
        for (l, e) in self.epsilon.iter().enumerate() {
            if !(e.sd > 0.0 && e.mean > 0.0 && e.upper > e.mean) {
                return Err(Error::Config(format!(
                    "bridging prior of subgroup {l} needs sd > 0 and 0 < mean < upper"
                )));
            }
        }
        Ok(())
    }
}

/// Prior probabilities that a subgroup's parameters are exchangeable with
/// each animal species, with the other human subgroups, or with nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct MixtureWeights {
    species: Vec<f64>,
    human: f64,
    robust: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    species: Vec<f64>,
    human: f64,
    robust: f64,
}

impl TryFrom<RawWeights> for MixtureWeights {
    type Error = Error;
    fn try_from(raw: RawWeights) -> Result<Self> {
        MixtureWeights::new(raw.species, raw.human, raw.robust)
    }
}

impl From<MixtureWeights> for RawWeights {
    fn from(w: MixtureWeights) -> Self {
        RawWeights {
            species: w.species,
            human: w.human,
            robust: w.robust,
        }
    }
}

impl MixtureWeights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(species: Vec<f64>, human: f64, robust: f64) -> Result<Self> {
        let all: Vec<f64> = species.iter().copied().chain([human, robust]).collect();
        if let Some(w) = all.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("mixture weight {w} is negative")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Config(format!("mixture weights sum to {sum}, not 1")));
        }
        Ok(Self {
            species,
            human,
            robust,
        })
    }

    /// Weights of the remaining components when the robust weight is implied.
    pub fn with_implied_robust(species: Vec<f64>, human: f64) -> Result<Self> {
        let robust = 1.0 - species.iter().sum::<f64>() - human;
        Self::new(species, human, robust.max(0.0))
    }

    pub fn robust_only(n_species: usize) -> Self {
        Self {
            species: vec![0.0; n_species],
            human: 0.0,
            robust: 1.0,
        }
    }

    pub fn species(&self) -> &[f64] {
        &self.species
    }

    pub fn human(&self) -> f64 {
        self.human
    }

    pub fn robust(&self) -> f64 {
        self.robust
    }

    pub fn n_components(&self) -> usize {
        self.species.len() + 2
    }

    /// All components in order: species..., human, robust.
    pub fn as_vec(&self) -> Vec<f64> {
        self.species
            .iter()
            .copied()
            .chain([self.human, self.robust])
            .collect()
    }

    pub fn from_components(components: &[f64]) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::Config("need at least the human and robust weights".into()));
        }
        let k = components.len() - 2;
        Self::new(components[..k].to_vec(), components[k], components[k + 1])
    }
}

/// Everything that specifies the prior of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub reference_dose: f64,
    pub hyper: HyperpriorConfig,
    pub translation: TranslationPriors,
    /// Subgroup labels, in the order of the human trials passed to the sampler.
    pub subgroups: Vec<String>,
    pub weights: Vec<MixtureWeights>,
    pub nex: Vec<NexPrior>,
}

impl ModelConfig {
    pub fn n_species(&self) -> usize {
        self.translation.species.len()
    }

    pub fn n_subgroups(&self) -> usize {
        self.subgroups.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.translation.species.iter().position(|s| s.species == name)
    }

    pub fn subgroup_index(&self, id: &str) -> Option<usize> {
        self.subgroups.iter().position(|s| s == id)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_dose > 0.0) {
            return Err(Error::Config("reference dose must be positive".into()));
        }
        self.hyper.validate()?;
        self.translation.validate()?;
        let l = self.subgroups.len();
        if self.weights.len() != l || self.nex.len() != l || self.translation.epsilon.len() != l {
            return Err(Error::Config(format!(
                "{l} subgroups but {} weight vectors, {} non-exchangeable priors, {} bridging priors",
                self.weights.len(),
                self.nex.len(),
                self.translation.epsilon.len()
            )));
        }
        for (id, w) in self.subgroups.iter().zip(&self.weights) {
            if w.species().len() != self.n_species() {
                return Err(Error::Config(format!(
                    "subgroup {id}: {} species weights for {} species",
                    w.species().len(),
                    self.n_species()
                )));
            }
        }
        for (id, nex) in self.subgroups.iter().zip(&self.nex) {
            if !nex.cov().is_valid() {
                return Err(Error::Config(format!(
                    "subgroup {id}: invalid non-exchangeable covariance"
                )));
            }
        }
        Ok(())
    }

    /// Restricts the configuration to the listed subgroups, in that order.
    pub fn select_subgroups(&self, ids: &[&str]) -> Result<ModelConfig> {
        let mut out = self.clone();
        out.subgroups.clear();
        out.weights.clear();
        out.nex.clear();
        out.translation.epsilon.clear();
        for id in ids {
            let l = self
                .subgroup_index(id)
                .ok_or_else(|| Error::Config(format!("unknown subgroup {id}")))?;
            out.subgroups.push(self.subgroups[l].clone());
            out.weights.push(self.weights[l].clone());
            out.nex.push(self.nex[l]);
            out.translation.epsilon.push(self.translation.epsilon[l]);
        }
        Ok(out)
    }

    /// Drops every animal species (and the corresponding weights, which must
    /// then be zero).
    pub fn without_species(&self) -> Result<ModelConfig> {
        let mut out = self.clone();
        out.translation.species.clear();
        out.weights = self
            .weights
            .iter()
            .map(|w| {
                if w.species().iter().any(|v| *v > 0.0) {
                    Err(Error::Config(
                        "cannot drop species that carry positive weight".into(),
                    ))
                } else {
                    MixtureWeights::new(vec![], w.human(), w.robust())
                }
            })
            .collect::<Result<_>>()?;
        Ok(out)
    }
}
