//! Metropolis-within-Gibbs sampler for the full model.
//!
//! Blocks: `(theta_1i, theta_2i)` per study, `mu_k` per species, `m`, `mu_H`
//! and `(gamma_1l, gamma_2l)` per subgroup are two-dimensional random-walk
//! updates; every standard deviation, correlation and standardized
//! translation variate is a scalar random-walk update; the mixture
//! indicators are drawn exactly from their full conditionals. Each block
//! only evaluates the density terms it appears in.
//!
//! Proposal scales follow a Robbins-Monro recursion during burn-in
//! (two-dimensional blocks also learn an empirical proposal covariance) and
//! are frozen afterwards.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::diagnostics::diagnose;
use super::indicator::sample_mixture_indicator;
use super::result::{BlockAcceptance, PosteriorResult, RunningSummary, SubgroupPosterior};
use super::settings::{FrozenBlocks, RunOptions, SamplerSettings};
use crate::error::Result;
use crate::model::density::BvnKernel;
use crate::model::{
    ln_bvn, logistic, AnimalStudy, CovTriple, Component, HumanTrialState, ModelConfig, ParameterState,
    Problem,
};
use crate::rng::{self, StreamRng};

const CHAIN_KEY: u64 = 0xc4a1_2b00;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Theta(usize),
    DeltaZ(usize),
    MuSpecies(usize),
    M,
    MuHuman,
    Gamma(usize),
    EpsZ(usize),
    Tau(usize),
    Sigma(usize),
    Rho,
    Kappa,
    Eta,
}

impl Block {
    fn dim(self) -> usize {
        match self {
            Block::Theta(_) | Block::MuSpecies(_) | Block::M | Block::MuHuman | Block::Gamma(_) => 2,
            _ => 1,
        }
    }

    fn name(self, cfg: &ModelConfig) -> String {
        match self {
            Block::Theta(i) => format!("theta[{i}]"),
            Block::DeltaZ(k) => format!("delta[{}]", cfg.translation.species[k].species),
            Block::MuSpecies(k) => format!("mu[{}]", cfg.translation.species[k].species),
            Block::M => "m".into(),
            Block::MuHuman => "mu_h".into(),
            Block::Gamma(l) => format!("gamma[{}]", cfg.subgroups[l]),
            Block::EpsZ(l) => format!("epsilon[{}]", cfg.subgroups[l]),
            Block::Tau(j) => format!("tau{}", j + 1),
            Block::Sigma(j) => format!("sigma{}", j + 1),
            Block::Rho => "rho".into(),
            Block::Kappa => "kappa".into(),
            Block::Eta => "eta".into(),
        }
    }

    fn initial_sd(self, cfg: &ModelConfig) -> [f64; 2] {
        let h = &cfg.hyper;
        match self {
            Block::Theta(_) | Block::Gamma(_) => [0.4, 0.2],
            Block::MuSpecies(_) | Block::M | Block::MuHuman => [0.3, 0.15],
            Block::DeltaZ(_) | Block::EpsZ(_) => [0.6, 0.0],
            Block::Tau(j) => [0.5 * h.tau_scales[j], 0.0],
            Block::Sigma(j) => [0.5 * h.sigma_scales[j], 0.0],
            Block::Rho | Block::Kappa | Block::Eta => [0.3, 0.0],
        }
    }
}

fn get(state: &ParameterState, b: Block) -> [f64; 2] {
    match b {
        Block::Theta(i) => state.theta[i],
        Block::DeltaZ(k) => [state.delta_z[k], 0.0],
        Block::MuSpecies(k) => state.mu_species[k],
        Block::M => state.m,
        Block::MuHuman => state.mu_human,
        Block::Gamma(l) => state.gamma[l],
        Block::EpsZ(l) => [state.eps_z[l], 0.0],
        Block::Tau(j) => [state.tau[j], 0.0],
        Block::Sigma(j) => [state.sigma[j], 0.0],
        Block::Rho => [state.rho, 0.0],
        Block::Kappa => [state.kappa, 0.0],
        Block::Eta => [state.eta, 0.0],
    }
}

fn set(state: &mut ParameterState, b: Block, v: [f64; 2]) {
    match b {
        Block::Theta(i) => state.theta[i] = v,
        Block::DeltaZ(k) => state.delta_z[k] = v[0],
        Block::MuSpecies(k) => state.mu_species[k] = v,
        Block::M => state.m = v,
        Block::MuHuman => state.mu_human = v,
        Block::Gamma(l) => state.gamma[l] = v,
        Block::EpsZ(l) => state.eps_z[l] = v[0],
        Block::Tau(j) => state.tau[j] = v[0],
        Block::Sigma(j) => state.sigma[j] = v[0],
        Block::Rho => state.rho = v[0],
        Block::Kappa => state.kappa = v[0],
        Block::Eta => state.eta = v[0],
    }
}

impl Problem {
    /// Log of every density term that involves block `b`, at the current
    /// state. Differences of this quantity between two values of the block
    /// equal differences of the full log joint density.
    fn log_conditional(&self, s: &ParameterState, b: Block) -> f64 {
        let cfg = &self.config;
        match b {
            Block::Theta(i) => {
                let k = self.studies[i].species;
                self.study_loglik(i, s.theta[i], s.log_delta(cfg, k))
                    + ln_bvn(s.theta[i], s.mu_species[k], s.psi())
            }
            Block::DeltaZ(k) => {
                let ld = s.log_delta(cfg, k);
                Self::ln_delta_z_prior(s.delta_z[k])
                    + self.species_studies[k]
                        .iter()
                        .map(|&i| self.study_loglik(i, s.theta[i], ld))
                        .sum::<f64>()
            }
            Block::MuSpecies(k) => {
                let psi = BvnKernel::new(s.psi());
                let mu = s.mu_species[k];
                ln_bvn(mu, s.m, s.sigma_cov())
                    + self.species_studies[k]
                        .iter()
                        .map(|&i| psi.ln_density(s.theta[i], mu))
                        .sum::<f64>()
                    + self.gamma_terms(s, |c| c == Component::Species(k))
            }
            Block::M => {
                let prior = self.ln_location_prior(s.m);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                let sig = BvnKernel::new(s.sigma_cov());
                prior + s.mu_species.iter().map(|mu| sig.ln_density(*mu, s.m)).sum::<f64>()
            }
            Block::MuHuman => {
                let prior = self.ln_location_prior(s.mu_human);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.gamma_terms(s, |c| c == Component::Human)
            }
            Block::Gamma(l) => {
                self.subgroup_loglik(l, s.gamma[l], s.epsilon(cfg, l))
                    + self.ln_component_density(s, l, s.indicator[l], s.gamma[l])
            }
            Block::EpsZ(l) => {
                let prior = self.ln_eps_z_prior(l, s.eps_z[l]);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.subgroup_loglik(l, s.gamma[l], s.epsilon(cfg, l))
            }
            Block::Tau(j) if j < 2 => {
                let prior = self.ln_tau_prior(j, s.tau[j]);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.psi_terms(s)
            }
            Block::Rho => {
                let prior = self.ln_corr_prior(s.rho);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.psi_terms(s)
            }
            Block::Tau(j) => {
                let prior = self.ln_tau_prior(j, s.tau[j]);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.gamma_terms(s, |c| c == Component::Human)
            }
            Block::Eta => {
                let prior = self.ln_corr_prior(s.eta);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.gamma_terms(s, |c| c == Component::Human)
            }
            Block::Sigma(j) => {
                let prior = self.ln_sigma_prior(j, s.sigma[j]);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.sigma_terms(s)
            }
            Block::Kappa => {
                let prior = self.ln_corr_prior(s.kappa);
                if prior == f64::NEG_INFINITY {
                    return prior;
                }
                prior + self.sigma_terms(s)
            }
        }
    }

    fn gamma_terms(&self, s: &ParameterState, pick: impl Fn(Component) -> bool) -> f64 {
        s.indicator
            .iter()
            .enumerate()
            .filter(|(_, c)| pick(**c))
            .map(|(l, c)| self.ln_component_density(s, l, *c, s.gamma[l]))
            .sum()
    }

    fn psi_terms(&self, s: &ParameterState) -> f64 {
        let psi = BvnKernel::new(s.psi());
        self.studies
            .iter()
            .zip(&s.theta)
            .map(|(st, th)| psi.ln_density(*th, s.mu_species[st.species]))
            .sum::<f64>()
            + s.indicator
                .iter()
                .zip(&s.gamma)
                .filter_map(|(c, g)| match c {
                    Component::Species(k) => Some(psi.ln_density(*g, s.mu_species[*k])),
                    _ => None,
                })
                .sum::<f64>()
    }

    fn sigma_terms(&self, s: &ParameterState) -> f64 {
        let sig = BvnKernel::new(s.sigma_cov());
        s.mu_species.iter().map(|mu| sig.ln_density(*mu, s.m)).sum()
    }

    fn blocks(&self, frozen: FrozenBlocks) -> Vec<Block> {
        let k = self.config.n_species();
        let l = self.config.n_subgroups();
        let mut b: Vec<Block> = (0..self.studies.len()).map(Block::Theta).collect();
        if !frozen.translation {
            b.extend((0..k).map(Block::DeltaZ));
        }
        if !frozen.hyperparameters {
            b.extend((0..k).map(Block::MuSpecies));
            b.extend([Block::M, Block::Sigma(0), Block::Sigma(1), Block::Kappa]);
            b.extend([Block::Tau(0), Block::Tau(1), Block::Rho]);
        }
        b.extend((0..l).map(Block::Gamma));
        if !frozen.translation {
            b.extend(
                (0..l)
                    .filter(|&i| !self.config.translation.epsilon[i].fixed)
                    .map(Block::EpsZ),
            );
        }
        if !frozen.hyperparameters {
            b.extend([Block::MuHuman, Block::Tau(2), Block::Tau(3), Block::Eta]);
        }
        b
    }
}

/// Proposal state of one block.
#[derive(Debug, Clone)]
struct Proposal {
    block: Block,
    log_scale: f64,
    /// Lower-triangular factor (l11, l21, l22) of the proposal covariance.
    chol: [f64; 3],
    empirical: bool,
    // Welford statistics of the block's values during burn-in.
    n: f64,
    mean: [f64; 2],
    co: [f64; 3],
    adapt_steps: usize,
    target: f64,
    accepted: u64,
    proposed: u64,
}

impl Proposal {
    fn new(block: Block, cfg: &ModelConfig, settings: &SamplerSettings) -> Self {
        let sd = block.initial_sd(cfg);
        let target = if block.dim() == 2 {
            settings.target_acceptance_block
        } else {
            settings.target_acceptance_scalar
        };
        Self {
            block,
            log_scale: 0.0,
            chol: [sd[0], 0.0, sd[1]],
            empirical: false,
            n: 0.0,
            mean: [0.0; 2],
            co: [0.0; 3],
            adapt_steps: 0,
            target,
            accepted: 0,
            proposed: 0,
        }
    }

    fn draw(&self, rng: &mut StreamRng, v: [f64; 2]) -> [f64; 2] {
        let s = self.log_scale.exp();
        let z1: f64 = rng.sample(StandardNormal);
        if self.block.dim() == 1 {
            return [v[0] + s * self.chol[0] * z1, v[1]];
        }
        let z2: f64 = rng.sample(StandardNormal);
        [
            v[0] + s * self.chol[0] * z1,
            v[1] + s * (self.chol[1] * z1 + self.chol[2] * z2),
        ]
    }

    fn adapt(&mut self, accepted: bool, v: [f64; 2], warmup: usize) {
        self.adapt_steps += 1;
        let step = (self.adapt_steps as f64).powf(-0.6);
        self.log_scale += step * ((accepted as u8 as f64) - self.target);
        if self.block.dim() == 1 {
            return;
        }
        self.n += 1.0;
        let d0 = v[0] - self.mean[0];
        let d1 = v[1] - self.mean[1];
        self.mean[0] += d0 / self.n;
        self.mean[1] += d1 / self.n;
        self.co[0] += d0 * (v[0] - self.mean[0]);
        self.co[1] += d0 * (v[1] - self.mean[1]);
        self.co[2] += d1 * (v[1] - self.mean[1]);
        if self.adapt_steps >= warmup && self.adapt_steps % 100 == 0 {
            let denom = self.n - 1.0;
            let c11 = self.co[0] / denom + 1e-8;
            let c21 = self.co[1] / denom;
            let c22 = self.co[2] / denom + 1e-8;
            let l11 = c11.sqrt();
            let l21 = c21 / l11;
            let rem = c22 - l21 * l21;
            if l11.is_finite() && rem > 0.0 {
                self.chol = [l11, l21, rem.sqrt()];
                if !self.empirical {
                    // Optimal random-walk scale for a 2-d Gaussian target.
                    self.log_scale = (2.38f64 / 2f64.sqrt()).ln();
                    self.empirical = true;
                }
            }
        }
    }
}

struct ChainOutput {
    tox: Vec<Vec<Vec<f64>>>,
    tox_summary: Vec<Vec<RunningSummary>>,
    gamma: Vec<Vec<[f64; 2]>>,
    eps: Vec<Vec<f64>>,
    comp_counts: Vec<Vec<u64>>,
    traces: Vec<Vec<f64>>,
    iterations: Vec<usize>,
    acceptance: Vec<(u64, u64)>,
}

fn trace_names(p: &Problem) -> Vec<String> {
    let cfg = &p.config;
    let mut names = Vec::new();
    for id in &cfg.subgroups {
        names.push(format!("gamma1[{id}]"));
        names.push(format!("gamma2[{id}]"));
        names.push(format!("epsilon[{id}]"));
    }
    for s in &cfg.translation.species {
        names.push(format!("delta[{}]", s.species));
    }
    names.extend(
        [
            "m1", "m2", "mu_h1", "mu_h2", "tau1", "tau2", "tau3", "tau4", "sigma1", "sigma2",
            "rho", "kappa", "eta",
        ]
        .map(String::from),
    );
    names
}

fn trace_values(p: &Problem, s: &ParameterState, out: &mut Vec<f64>) {
    let cfg = &p.config;
    out.clear();
    for l in 0..cfg.n_subgroups() {
        out.extend([s.gamma[l][0], s.gamma[l][1], s.epsilon(cfg, l)]);
    }
    for k in 0..cfg.n_species() {
        out.push(s.delta(cfg, k));
    }
    out.extend([
        s.m[0],
        s.m[1],
        s.mu_human[0],
        s.mu_human[1],
        s.tau[0],
        s.tau[1],
        s.tau[2],
        s.tau[3],
        s.sigma[0],
        s.sigma[1],
        s.rho,
        s.kappa,
        s.eta,
    ]);
}

fn draw_component(weights: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = weights.len() - 1;
    for (c, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last = c;
            acc += w;
            if u < acc {
                return c;
            }
        }
    }
    last
}

fn initial_state(p: &Problem, rng: &mut StreamRng) -> ParameterState {
    let cfg = &p.config;
    let mut s = ParameterState::central(cfg, &p.species_of_studies());
    let mut jitter = |v: &mut [f64; 2], sd: f64| {
        for x in v.iter_mut() {
            *x += sd * rng.sample::<f64, _>(StandardNormal);
        }
    };
    for th in s.theta.iter_mut() {
        jitter(th, 0.3);
    }
    for mu in s.mu_species.iter_mut() {
        jitter(mu, 0.3);
    }
    jitter(&mut s.m, 0.3);
    jitter(&mut s.mu_human, 0.3);
    for g in s.gamma.iter_mut() {
        jitter(g, 0.3);
    }
    for t in s.tau.iter_mut() {
        *t *= rng.random_range(0.5..1.5);
    }
    for t in s.sigma.iter_mut() {
        *t *= rng.random_range(0.5..1.5);
    }
    s.rho = rng.random_range(-0.3..0.3);
    s.kappa = rng.random_range(-0.3..0.3);
    s.eta = rng.random_range(-0.3..0.3);
    for z in s.delta_z.iter_mut() {
        *z = rng.random_range(-0.5..0.5);
    }
    for z in s.eps_z.iter_mut() {
        *z = rng.random_range(-0.5..0.5);
    }
    for (l, w) in cfg.weights.iter().enumerate() {
        s.indicator[l] = Component::from_index(draw_component(&w.as_vec(), rng), cfg.n_species());
    }
    s
}

fn update_indicators(
    p: &Problem,
    s: &mut ParameterState,
    rng: &mut StreamRng,
    comps: &mut Vec<([f64; 2], CovTriple)>,
) {
    let cfg = &p.config;
    let k = cfg.n_species();
    for l in 0..cfg.n_subgroups() {
        comps.clear();
        comps.extend((0..k + 2).map(|c| p.component_params(s, l, Component::from_index(c, k))));
        let u: f64 = rng.random();
        let c = sample_mixture_indicator(s.gamma[l], comps, &cfg.weights[l], u);
        s.indicator[l] = Component::from_index(c, k);
    }
}

#[inline]
fn clamp_open(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn run_chain(
    p: &Problem,
    settings: &SamplerSettings,
    options: &RunOptions,
    chain: usize,
) -> ChainOutput {
    let cfg = &p.config;
    let mut rng = rng::stream(rng::derive_seed(settings.seed, CHAIN_KEY), chain as u64);
    let mut state = match &options.initial {
        Some(s) => s.clone(),
        None => initial_state(p, &mut rng),
    };
    let mut proposals: Vec<Proposal> = p
        .blocks(options.frozen)
        .into_iter()
        .map(|b| Proposal::new(b, cfg, settings))
        .collect();

    let n_sub = cfg.n_subgroups();
    let n_comp = cfg.n_species() + 2;
    let retained = settings.retained_per_chain();
    let per_chain_cap = (settings.max_stored_draws / settings.n_chains).max(1);
    let stride = retained.div_ceil(per_chain_cap).max(1);
    let n_stored = retained.div_ceil(stride);

    let mut out = ChainOutput {
        tox: p
            .subgroups
            .iter()
            .map(|sg| vec![Vec::with_capacity(n_stored); sg.grid_x.len()])
            .collect(),
        tox_summary: p
            .subgroups
            .iter()
            .map(|sg| vec![RunningSummary::default(); sg.grid_x.len()])
            .collect(),
        gamma: vec![Vec::with_capacity(n_stored); n_sub],
        eps: vec![Vec::with_capacity(n_stored); n_sub],
        comp_counts: vec![vec![0; n_comp]; n_sub],
        traces: Vec::new(),
        iterations: Vec::with_capacity(n_stored),
        acceptance: Vec::new(),
    };
    let n_trace = trace_names(p).len();
    if settings.diagnostics {
        out.traces = vec![Vec::with_capacity(n_stored); n_trace];
    }
    let mut trace_buf = Vec::with_capacity(n_trace);
    let mut retained_count = 0usize;
    let mut comps = Vec::with_capacity(n_comp);

    for iter in 0..settings.n_iterations {
        let burning = iter < settings.n_burnin;
        let mut indicators_done = false;
        for prop in proposals.iter_mut() {
            let b = prop.block;
            if !indicators_done && matches!(b, Block::Gamma(_)) {
                update_indicators(p, &mut state, &mut rng, &mut comps);
                indicators_done = true;
            }
            let old = get(&state, b);
            let f_old = p.log_conditional(&state, b);
            let new = prop.draw(&mut rng, old);
            set(&mut state, b, new);
            let f_new = p.log_conditional(&state, b);
            let u: f64 = rng.random();
            let accept = u.ln() < f_new - f_old;
            if !accept {
                set(&mut state, b, old);
            }
            if burning {
                prop.adapt(accept, get(&state, b), settings.adaptation_warmup);
            } else {
                prop.proposed += 1;
                prop.accepted += accept as u64;
            }
        }
        if !indicators_done {
            update_indicators(p, &mut state, &mut rng, &mut comps);
        }

        if burning || (iter - settings.n_burnin) % settings.thinning != 0 {
            continue;
        }
        let store = retained_count % stride == 0;
        retained_count += 1;
        for l in 0..n_sub {
            let eps = state.epsilon(cfg, l);
            let g = state.gamma[l];
            let slope = g[1].exp();
            let ln_eps = eps.ln();
            for (j, x) in p.subgroups[l].grid_x.iter().enumerate() {
                let prob = clamp_open(logistic(g[0] + slope * (ln_eps + x)));
                out.tox_summary[l][j].push(prob);
                if store {
                    out.tox[l][j].push(prob);
                }
            }
            out.comp_counts[l][state.indicator[l].index(cfg.n_species())] += 1;
            if store {
                out.gamma[l].push(g);
                out.eps[l].push(eps);
            }
        }
        if store {
            out.iterations.push(iter);
            if settings.diagnostics {
                trace_values(p, &state, &mut trace_buf);
                for (t, v) in out.traces.iter_mut().zip(&trace_buf) {
                    t.push(*v);
                }
            }
        }
    }
    out.acceptance = proposals.iter().map(|q| (q.accepted, q.proposed)).collect();
    out
}

/// Runs the sampler on a compiled problem.
pub fn run_posterior_with(
    problem: &Problem,
    settings: &SamplerSettings,
    options: &RunOptions,
) -> Result<PosteriorResult> {
    settings.validate()?;
    if let Some(init) = &options.initial {
        problem.check_state(init)?;
    }
    let chains: Vec<ChainOutput> = (0..settings.n_chains)
        .into_par_iter()
        .map(|c| run_chain(problem, settings, options, c))
        .collect();

    let cfg = &problem.config;
    let k = cfg.n_species();
    let labels: Vec<String> = cfg
        .translation
        .species
        .iter()
        .map(|s| s.species.clone())
        .chain(["Human".to_string(), "Robust".to_string()])
        .collect();
    let subgroups = (0..cfg.n_subgroups())
        .map(|l| {
            let n_dose = problem.subgroups[l].grid_x.len();
            let tox_draws = (0..n_dose)
                .map(|j| chains.iter().flat_map(|c| c.tox[l][j].iter().copied()).collect())
                .collect();
            let tox_summary = (0..n_dose)
                .map(|j| {
                    chains
                        .iter()
                        .fold(RunningSummary::default(), |acc, c| acc.merge(&c.tox_summary[l][j]))
                })
                .collect();
            let counts: Vec<u64> = (0..k + 2)
                .map(|c| chains.iter().map(|ch| ch.comp_counts[l][c]).sum())
                .collect();
            let total: u64 = counts.iter().sum();
            SubgroupPosterior {
                subgroup_id: cfg.subgroups[l].clone(),
                doses: problem.grid_doses[l].clone(),
                tox_draws,
                tox_summary,
                gamma_draws: chains.iter().flat_map(|c| c.gamma[l].iter().copied()).collect(),
                epsilon_draws: chains.iter().flat_map(|c| c.eps[l].iter().copied()).collect(),
                component_labels: labels.clone(),
                component_frequencies: counts
                    .iter()
                    .map(|c| *c as f64 / total.max(1) as f64)
                    .collect(),
            }
        })
        .collect();

    let diagnostics = if settings.diagnostics {
        trace_names(problem)
            .into_iter()
            .enumerate()
            .map(|(t, name)| {
                let traces: Vec<Vec<f64>> = chains.iter().map(|c| c.traces[t].clone()).collect();
                diagnose(name, &traces)
            })
            .collect()
    } else {
        Vec::new()
    };

    let blocks = problem.blocks(options.frozen);
    let acceptance = blocks
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let (acc, prop) = chains.iter().fold((0, 0), |(a, n), c| {
                (a + c.acceptance[b].0, n + c.acceptance[b].1)
            });
            BlockAcceptance {
                block: block.name(cfg),
                rate: acc as f64 / prop.max(1) as f64,
            }
        })
        .collect();

    Ok(PosteriorResult {
        subgroups,
        diagnostics,
        acceptance,
        n_chains: settings.n_chains,
        retained_per_chain: settings.retained_per_chain(),
        stored_iterations: chains.iter().flat_map(|c| c.iterations.iter().copied()).collect(),
    })
}

/// Draws from the joint posterior of the full model.
///
/// Deterministic given `(settings, data, config)`: each chain owns a random
/// stream derived from `settings.seed` and the chain index.
pub fn run_posterior(
    animal: &[AnimalStudy],
    human: &[HumanTrialState],
    config: &ModelConfig,
    settings: &SamplerSettings,
) -> Result<PosteriorResult> {
    let problem = Problem::new(animal, human, config)?;
    run_posterior_with(&problem, settings, &RunOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cohort;
    use crate::presets;

    fn problem() -> Problem {
        let cfg = presets::two_trial_config();
        let grid = presets::dose_grid();
        let t1 = HumanTrialState::new("T1", grid.clone(), 24, 3)
            .unwrap()
            .with_cohorts([
                Cohort { dose_index: 0, n_treated: 3, n_dlt: 0 },
                Cohort { dose_index: 1, n_treated: 3, n_dlt: 1 },
            ])
            .unwrap();
        let t2 = HumanTrialState::new("T2", grid, 24, 3)
            .unwrap()
            .with_cohorts([Cohort { dose_index: 2, n_treated: 3, n_dlt: 2 }])
            .unwrap();
        Problem::new(&presets::animal_studies(), &[t1, t2], &cfg).unwrap()
    }

    #[test]
    fn block_conditionals_track_the_joint_density() {
        let p = problem();
        let mut rng = rng::stream(11, 0);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let base = initial_state(&p, &mut rng);
            for b in p.blocks(FrozenBlocks::default()) {
                let mut s = base.clone();
                let f_old = p.log_conditional(&s, b);
                let full_old = p.log_density_terms(&s).unwrap().total();
                let prop = Proposal::new(b, &p.config, &SamplerSettings::default());
                let new = prop.draw(&mut rng, get(&s, b));
                set(&mut s, b, new);
                let f_new = p.log_conditional(&s, b);
                let full_new = p.log_density_terms(&s).unwrap().total();
                assert_eq!(f_new.is_finite(), full_new.is_finite(), "block {b:?}");
                if f_new.is_finite() {
                    worst = worst.max(((f_new - f_old) - (full_new - full_old)).abs());
                }
            }
        }
        assert!(worst < 1e-8, "largest discrepancy {worst}");
    }

    fn short() -> SamplerSettings {
        SamplerSettings {
            n_iterations: 600,
            n_burnin: 200,
            ..SamplerSettings::default()
        }
    }

    #[test]
    fn runs_are_reproducible_per_seed() {
        let p = problem();
        let a = run_posterior_with(&p, &short(), &RunOptions::default()).unwrap();
        let b = run_posterior_with(&p, &short(), &RunOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = run_posterior_with(&p, &short().with_seed(99), &RunOptions::default()).unwrap();
        assert_ne!(a.subgroups[0].tox_draws, c.subgroups[0].tox_draws);
    }

    #[test]
    fn only_post_burnin_iterations_are_stored() {
        let p = problem();
        let settings = SamplerSettings {
            thinning: 3,
            ..short()
        };
        let r = run_posterior_with(&p, &settings, &RunOptions::default()).unwrap();
        assert!(r.stored_iterations.iter().all(|i| *i >= 200 && (i - 200) % 3 == 0));
        assert_eq!(r.stored_iterations.len(), 2 * settings.retained_per_chain());
        assert_eq!(r.subgroups[0].tox_draws[0].len(), r.stored_iterations.len());
    }

    #[test]
    fn storage_cap_thins_draws_but_not_summaries() {
        let p = problem();
        let settings = SamplerSettings {
            max_stored_draws: 100,
            ..short()
        };
        let r = run_posterior_with(&p, &settings, &RunOptions::default()).unwrap();
        assert!(r.subgroups[0].tox_draws[0].len() <= 100);
        assert_eq!(r.subgroups[0].tox_summary[0].count, 800);
    }

    #[test]
    fn acceptance_rates_are_reported_per_block() {
        let p = problem();
        let r = run_posterior_with(&p, &short(), &RunOptions::default()).unwrap();
        assert_eq!(r.acceptance.len(), p.blocks(FrozenBlocks::default()).len());
        for a in &r.acceptance {
            assert!(a.rate > 0.02 && a.rate < 0.98, "{} accepts {}", a.block, a.rate);
        }
    }
}
