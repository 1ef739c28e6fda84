use std::f64::consts::{LN_2, PI};

use statrs::function::factorial::ln_binomial;

use super::config::{CovTriple, ModelConfig};
use super::data::{AnimalStudy, HumanTrialState};
use super::state::{Component, ParameterState};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// DLT probability under the two-parameter logistic model:
/// `logit p = intercept + exp(log_slope) * ln(scale_factor * dose / reference_dose)`.
pub fn tox_prob(
    intercept: f64,
    log_slope: f64,
    scale_factor: f64,
    dose: f64,
    reference_dose: f64,
) -> Result<f64> {
    for (name, v) in [
        ("dose", dose),
        ("scale factor", scale_factor),
        ("reference dose", reference_dose),
    ] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let x = (scale_factor * dose / reference_dose).ln();
    Ok(logistic(linear_predictor(intercept, log_slope, x)))
}

#[inline]
pub(crate) fn linear_predictor(intercept: f64, log_slope: f64, log_rel_dose: f64) -> f64 {
    let slope = log_slope.exp();
    if slope == 0.0 {
        intercept
    } else {
        intercept + slope * log_rel_dose
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binomial log-likelihood kernel `r ln p + (n - r) ln(1 - p)` written in the
/// logit `eta`; exact for all finite `eta`.
#[inline]
fn binomial_kernel(eta: f64, n: f64, r: f64) -> f64 {
    r * eta - n * softplus(eta)
}

/// Log-density of a bivariate normal with covariance given as a triple.
#[inline]
pub fn ln_bvn(x: [f64; 2], mean: [f64; 2], cov: CovTriple) -> f64 {
    BvnKernel::new(cov).ln_density(x, mean)
}

/// Bivariate normal log-density with the normalizing constant precomputed,
/// for evaluating one covariance at many points.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BvnKernel {
    inv_sd1: f64,
    inv_sd2: f64,
    corr: f64,
    inv_one_m_r2: f64,
    ln_norm: f64,
}

impl BvnKernel {
    #[inline]
    pub(crate) fn new(cov: CovTriple) -> Self {
        let one_m_r2 = 1.0 - cov.corr * cov.corr;
        Self {
            inv_sd1: 1.0 / cov.sd1,
            inv_sd2: 1.0 / cov.sd2,
            corr: cov.corr,
            inv_one_m_r2: 1.0 / one_m_r2,
            ln_norm: -LN_2PI - (cov.sd1 * cov.sd2).ln() - 0.5 * one_m_r2.ln(),
        }
    }

    #[inline]
    pub(crate) fn ln_density(&self, x: [f64; 2], mean: [f64; 2]) -> f64 {
        let z1 = (x[0] - mean[0]) * self.inv_sd1;
        let z2 = (x[1] - mean[1]) * self.inv_sd2;
        let q = (z1 * z1 - 2.0 * self.corr * z1 * z2 + z2 * z2) * self.inv_one_m_r2;
        self.ln_norm - 0.5 * q
    }
}

#[inline]
fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * z * z
}

/// Half-normal log-density with an indicator floor.
#[inline]
fn ln_half_normal(x: f64, scale: f64, floor: f64) -> f64 {
    if x < floor {
        f64::NEG_INFINITY
    } else {
        LN_2 + ln_normal(x, 0.0, scale)
    }
}

#[inline]
fn ln_uniform(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if x > lo && x < hi {
        -(hi - lo).ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DosePoint {
    /// ln(d / d_ref)
    pub x: f64,
    pub n: f64,
    pub r: f64,
    pub ln_choose: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledStudy {
    pub species: usize,
    pub points: Vec<DosePoint>,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledSubgroup {
    pub points: Vec<DosePoint>,
    /// ln(d / d_ref) for every grid dose.
    pub grid_x: Vec<f64>,
}

/// Log joint density split into its additive parts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogDensityTerms {
    pub animal_likelihood: f64,
    pub human_likelihood: f64,
    /// theta_i | mu_{species(i)}, Psi
    pub study_effects: f64,
    /// mu_k | m, Sigma
    pub species_effects: f64,
    /// gamma_l | selected component, plus the log prior weight of that component
    pub subgroup_mixture: f64,
    /// m, mu_H, tau, sigma, rho, kappa, eta
    pub hyperpriors: f64,
    /// standardized translation and bridging variates
    pub translation: f64,
}

impl LogDensityTerms {
    pub fn total(&self) -> f64 {
        self.animal_likelihood
            + self.human_likelihood
            + self.study_effects
            + self.species_effects
            + self.subgroup_mixture
            + self.hyperpriors
            + self.translation
    }

    pub fn prior(&self) -> f64 {
        self.total() - self.animal_likelihood - self.human_likelihood
    }
}

/// Data and configuration compiled into the form the density and the sampler
/// work with. Doses with no subjects are dropped from the likelihood.
#[derive(Debug, Clone)]
pub struct Problem {
    pub(crate) config: ModelConfig,
    pub(crate) studies: Vec<CompiledStudy>,
    pub(crate) species_studies: Vec<Vec<usize>>,
    pub(crate) subgroups: Vec<CompiledSubgroup>,
    pub(crate) grid_doses: Vec<Vec<f64>>,
}

fn compile_points(x: &[f64], counts: impl Iterator<Item = (u32, u32)>) -> Vec<DosePoint> {
    x.iter()
        .zip(counts)
        .filter(|(_, (n, _))| *n > 0)
        .map(|(&x, (n, r))| DosePoint {
            x,
            n: n as f64,
            r: r as f64,
            ln_choose: ln_binomial(n as u64, r as u64),
        })
        .collect()
}

impl Problem {
    pub fn new(
        animal: &[AnimalStudy],
        human: &[HumanTrialState],
        config: &ModelConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d_ref = config.reference_dose;
        let same_ref = |r: f64| (r - d_ref).abs() <= 1e-12 * d_ref;
        let mut species_studies = vec![Vec::new(); config.n_species()];
        let mut studies = Vec::with_capacity(animal.len());
        for (i, s) in animal.iter().enumerate() {
            let k = config.species_index(&s.species).ok_or_else(|| {
                Error::Config(format!(
                    "study {} has species {} absent from the configuration",
                    s.study_id, s.species
                ))
            })?;
            if !same_ref(s.grid().reference_dose()) {
                return Err(Error::Config(format!(
                    "study {} uses reference dose {}, analysis uses {d_ref}",
                    s.study_id,
                    s.grid().reference_dose()
                )));
            }
            let x = s.grid().log_relative_doses();
            let counts = s.n().iter().copied().zip(s.r().iter().copied());
            studies.push(CompiledStudy {
                species: k,
                points: compile_points(&x, counts),
            });
            species_studies[k].push(i);
        }
        if human.len() != config.n_subgroups() {
            return Err(Error::Config(format!(
                "{} human trials for {} configured subgroups",
                human.len(),
                config.n_subgroups()
            )));
        }
        let mut subgroups = Vec::with_capacity(human.len());
        let mut grid_doses = Vec::with_capacity(human.len());
        for (t, id) in human.iter().zip(&config.subgroups) {
            if &t.subgroup_id != id {
                return Err(Error::Config(format!(
                    "trial for subgroup {} passed where {id} was configured",
                    t.subgroup_id
                )));
            }
            if !same_ref(t.grid().reference_dose()) {
                return Err(Error::Config(format!(
                    "trial {id} uses reference dose {}, analysis uses {d_ref}",
                    t.grid().reference_dose()
                )));
            }
            let x = t.grid().log_relative_doses();
            subgroups.push(CompiledSubgroup {
                points: compile_points(&x, t.tallies().into_iter()),
                grid_x: x,
            });
            grid_doses.push(t.grid().doses().to_vec());
        }
        Ok(Self {
            config: config.clone(),
            studies,
            species_studies,
            subgroups,
            grid_doses,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn species_of_studies(&self) -> Vec<usize> {
        self.studies.iter().map(|s| s.species).collect()
    }

    pub fn check_state(&self, state: &ParameterState) -> Result<()> {
        let k = self.config.n_species();
        let l = self.config.n_subgroups();
        let ok = state.theta.len() == self.studies.len()
            && state.mu_species.len() == k
            && state.delta_z.len() == k
            && state.gamma.len() == l
            && state.indicator.len() == l
            && state.eps_z.len() == l;
        if !ok {
            return Err(Error::Config(
                "parameter state dimensions do not match the data".into(),
            ));
        }
        if let Some(c) = state.indicator.iter().find(|c| match c {
            Component::Species(s) => *s >= k,
            _ => false,
        }) {
            return Err(Error::Config(format!("indicator {c:?} is not a valid component")));
        }
        Ok(())
    }

    // ---- likelihood pieces -------------------------------------------------

    /// Binomial log-likelihood of animal study `i` (without binomial
    /// coefficients, which are constant).
    #[inline]
    pub(crate) fn study_loglik(&self, i: usize, theta: [f64; 2], log_delta: f64) -> f64 {
        let slope = theta[1].exp();
        self.studies[i]
            .points
            .iter()
            .map(|p| binomial_kernel(theta[0] + slope * (log_delta + p.x), p.n, p.r))
            .sum()
    }

    #[inline]
    pub(crate) fn subgroup_loglik(&self, l: usize, gamma: [f64; 2], eps: f64) -> f64 {
        let points = &self.subgroups[l].points;
        if points.is_empty() {
            return 0.0;
        }
        let slope = gamma[1].exp();
        let ln_eps = eps.ln();
        points
            .iter()
            .map(|p| binomial_kernel(gamma[0] + slope * (ln_eps + p.x), p.n, p.r))
            .sum()
    }

    fn ln_choose_total(&self) -> (f64, f64) {
        let a = self
            .studies
            .iter()
            .flat_map(|s| s.points.iter())
            .map(|p| p.ln_choose)
            .sum();
        let h = self
            .subgroups
            .iter()
            .flat_map(|s| s.points.iter())
            .map(|p| p.ln_choose)
            .sum();
        (a, h)
    }

    // ---- prior pieces ------------------------------------------------------

    #[inline]
    pub(crate) fn ln_location_prior(&self, v: [f64; 2]) -> f64 {
        let h = &self.config.hyper;
        let [(lo1, hi1), (lo2, hi2)] = h.location_bounds;
        if !(v[0] > lo1 && v[0] < hi1 && v[1] > lo2 && v[1] < hi2) {
            return f64::NEG_INFINITY;
        }
        ln_normal(v[0], h.mean_intercept.mean, h.mean_intercept.sd)
            + ln_normal(v[1], h.mean_log_slope.mean, h.mean_log_slope.sd)
    }

    #[inline]
    pub(crate) fn ln_tau_prior(&self, j: usize, v: f64) -> f64 {
        let h = &self.config.hyper;
        ln_half_normal(v, h.tau_scales[j], h.sd_floor)
    }

    #[inline]
    pub(crate) fn ln_sigma_prior(&self, j: usize, v: f64) -> f64 {
        let h = &self.config.hyper;
        ln_half_normal(v, h.sigma_scales[j], h.sd_floor)
    }

    #[inline]
    pub(crate) fn ln_corr_prior(&self, v: f64) -> f64 {
        ln_uniform(v, self.config.hyper.corr_bounds)
    }

    #[inline]
    pub(crate) fn ln_delta_z_prior(z: f64) -> f64 {
        ln_normal(z, 0.0, 1.0)
    }

    #[inline]
    pub(crate) fn ln_eps_z_prior(&self, l: usize, z: f64) -> f64 {
        let e = &self.config.translation.epsilon[l];
        if e.fixed {
            return 0.0;
        }
        let (lo, hi) = e.standardized_bounds();
        if z > lo && z < hi {
            ln_normal(z, 0.0, 1.0)
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Mean and covariance of component `c` for subgroup `l`.
    #[inline]
    pub(crate) fn component_params(
        &self,
        state: &ParameterState,
        l: usize,
        c: Component,
    ) -> ([f64; 2], CovTriple) {
        match c {
            Component::Species(k) => (state.mu_species[k], state.psi()),
            Component::Human => (state.mu_human, state.phi()),
            Component::Robust => (self.config.nex[l].mean, self.config.nex[l].cov()),
        }
    }

    #[inline]
    pub(crate) fn ln_component_density(
        &self,
        state: &ParameterState,
        l: usize,
        c: Component,
        gamma: [f64; 2],
    ) -> f64 {
        let (mean, cov) = self.component_params(state, l, c);
        ln_bvn(gamma, mean, cov)
    }

    // ---- full density ------------------------------------------------------

    /// Every term of the log joint density at `state`. Truncations are
    /// indicator functions: a state outside any bound gives negative infinity
    /// in the corresponding term.
    pub fn log_density_terms(&self, state: &ParameterState) -> Result<LogDensityTerms> {
        self.check_state(state)?;
        let cfg = &self.config;
        let k = cfg.n_species();
        let (choose_a, choose_h) = self.ln_choose_total();

        let animal_likelihood = choose_a
            + (0..self.studies.len())
                .map(|i| {
                    let s = self.studies[i].species;
                    self.study_loglik(i, state.theta[i], state.log_delta(cfg, s))
                })
                .sum::<f64>();

        let human_likelihood = choose_h
            + (0..self.subgroups.len())
                .map(|l| self.subgroup_loglik(l, state.gamma[l], state.epsilon(cfg, l)))
                .sum::<f64>();

        let psi = state.psi();
        let study_effects = self
            .studies
            .iter()
            .zip(&state.theta)
            .map(|(s, th)| ln_bvn(*th, state.mu_species[s.species], psi))
            .sum();

        let sig = state.sigma_cov();
        let species_effects = state
            .mu_species
            .iter()
            .map(|mu| ln_bvn(*mu, state.m, sig))
            .sum();

        let subgroup_mixture = (0..cfg.n_subgroups())
            .map(|l| {
                let c = state.indicator[l];
                let w = cfg.weights[l].as_vec()[c.index(k)];
                w.ln() + self.ln_component_density(state, l, c, state.gamma[l])
            })
            .sum();

        let hyperpriors = self.ln_location_prior(state.m)
            + self.ln_location_prior(state.mu_human)
            + (0..4).map(|j| self.ln_tau_prior(j, state.tau[j])).sum::<f64>()
            + (0..2).map(|j| self.ln_sigma_prior(j, state.sigma[j])).sum::<f64>()
            + self.ln_corr_prior(state.rho)
            + self.ln_corr_prior(state.kappa)
            + self.ln_corr_prior(state.eta);

        let translation = state
            .delta_z
            .iter()
            .map(|z| Self::ln_delta_z_prior(*z))
            .sum::<f64>()
            + (0..cfg.n_subgroups())
                .map(|l| self.ln_eps_z_prior(l, state.eps_z[l]))
                .sum::<f64>();

        Ok(LogDensityTerms {
            animal_likelihood,
            human_likelihood,
            study_effects,
            species_effects,
            subgroup_mixture,
            hyperpriors,
            translation,
        })
    }
}

/// Log joint density of the full hierarchical model at `state`.
///
/// Returns negative infinity (not an error) for states violating a
/// truncation bound; returns an error when the state's dimensions do not
/// match the data or the configuration is inconsistent.
pub fn log_joint_density(
    state: &ParameterState,
    animal: &[AnimalStudy],
    human: &[HumanTrialState],
    config: &ModelConfig,
) -> Result<f64> {
    Ok(Problem::new(animal, human, config)?
        .log_density_terms(state)?
        .total())
}
