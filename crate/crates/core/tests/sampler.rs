use exnex_core::mcmc::*;
use exnex_core::model::*;
use exnex_core::presets;

fn grid() -> DoseGrid {
    presets::dose_grid()
}

fn trial(id: &str, cohorts: &[(usize, u32)]) -> HumanTrialState {
    HumanTrialState::new(id, grid(), 24, 3)
        .unwrap()
        .with_cohorts(cohorts.iter().map(|(d, r)| Cohort {
            dose_index: *d,
            n_treated: 3,
            n_dlt: *r,
        }))
        .unwrap()
}

/// Monte-Carlo standard error of the mean of concatenated chains.
fn mcse(draws: &[f64], n_chains: usize) -> (f64, f64) {
    let n = draws.len() / n_chains;
    let chains: Vec<Vec<f64>> = draws.chunks(n).map(<[f64]>::to_vec).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    let ess = effective_sample_size(&chains).unwrap();
    (mean, (var / ess).sqrt())
}

#[test]
fn empty_model_reproduces_the_prior_location() {
    let mut cfg = presets::config(&[("T1", MixtureWeights::robust_only(2))]).unwrap();
    cfg = cfg.without_species().unwrap();
    let settings = SamplerSettings::default();
    let r = run_posterior(&[], &[trial("T1", &[])], &cfg, &settings).unwrap();
    let g1: Vec<f64> = r.subgroups[0].gamma_draws.iter().map(|g| g[0]).collect();
    let (mean, se) = mcse(&g1, settings.n_chains);
    assert!((mean + 1.099).abs() < 3.0 * se, "mean {mean}, se {se}");
    assert_eq!(r.subgroups[0].component_frequencies, vec![0.0, 1.0]);
}

/// Posterior of (gamma_1, gamma_2) for one subgroup whose prior is a fixed
/// two-component mixture, by 400 x 400 midpoint integration over the box
/// (-10, 10) x (-5, 5). Returns mean and sd of p at each dose.
fn grid_oracle(
    data: &[(u32, u32)],
    x: &[f64],
    eps: f64,
    comps: &[(f64, [f64; 2], [f64; 2], f64)],
) -> Vec<(f64, f64)> {
    let n = 400;
    let (h1, h2) = (20.0 / n as f64, 10.0 / n as f64);
    let mut logs = Vec::with_capacity(n * n);
    for i in 0..n {
        let a = -10.0 + (i as f64 + 0.5) * h1;
        for j in 0..n {
            let b = -5.0 + (j as f64 + 0.5) * h2;
            let prior: f64 = comps
                .iter()
                .map(|(w, mean, sd, corr)| {
                    let z1 = (a - mean[0]) / sd[0];
                    let z2 = (b - mean[1]) / sd[1];
                    let q = (z1 * z1 - 2.0 * corr * z1 * z2 + z2 * z2) / (1.0 - corr * corr);
                    w * (-0.5 * q).exp() / (sd[0] * sd[1] * (1.0 - corr * corr).sqrt())
                })
                .sum();
            let mut ll = prior.ln();
            for ((nn, r), xj) in data.iter().zip(x) {
                // r ln p + (n - r) ln(1 - p) in terms of the logit
                let eta = a + b.exp() * (eps.ln() + xj);
                let ln1pexp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
                ll += *r as f64 * eta - *nn as f64 * ln1pexp;
            }
            logs.push((a, b, ll));
        }
    }
    let max = logs.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|t| (t.2 - max).exp()).collect();
    let total: f64 = w.iter().sum();
    x.iter()
        .map(|xj| {
            let (mut m1, mut m2) = (0.0, 0.0);
            for ((a, b, _), wt) in logs.iter().zip(&w) {
                let p = 1.0 / (1.0 + (-(a + b.exp() * (eps.ln() + xj))).exp());
                m1 += wt * p;
                m2 += wt * p * p;
            }
            let mean = m1 / total;
            (mean, (m2 / total - mean * mean).sqrt())
        })
        .collect()
}

#[test]
fn reduced_model_matches_grid_integration() {
    let cfg = presets::config(&[(
        "T1",
        MixtureWeights::new(vec![0.0, 0.6], 0.0, 0.4).unwrap(),
    )])
    .unwrap();
    let animal = vec![presets::animal_studies().remove(0)];
    let t1 = trial("T1", &[(0, 0), (1, 0), (2, 1), (3, 2)]);
    let problem = Problem::new(&animal, &[t1.clone()], &cfg).unwrap();
    let mut init = ParameterState::central(&cfg, &problem.species_of_studies());
    init.mu_species[1] = [-1.6, 0.1];
    init.tau = [0.6, 0.3, 0.25, 0.125];
    init.rho = 0.2;
    init.eps_z = vec![0.3];
    let options = RunOptions {
        initial: Some(init.clone()),
        frozen: FrozenBlocks {
            hyperparameters: true,
            translation: true,
        },
    };
    let settings = SamplerSettings::default();
    let r = run_posterior_with(&problem, &settings, &options).unwrap();

    let eps = 1.0 + 0.255 * 0.3;
    let nex = NexPrior::default();
    let oracle = grid_oracle(
        &t1.tallies(),
        &grid().log_relative_doses(),
        eps,
        &[
            (0.6, init.mu_species[1], [0.6, 0.3], 0.2),
            (0.4, nex.mean, nex.sd, nex.corr),
        ],
    );
    for (j, (m, sd)) in oracle.iter().enumerate() {
        let s = r.subgroups[0].tox_summary[j];
        assert!((s.mean - m).abs() < 0.02, "dose {j}: mean {} vs {m}", s.mean);
        assert!((s.sd() - sd).abs() < 0.03, "dose {j}: sd {} vs {sd}", s.sd());
    }
    assert!(r.subgroups[0].epsilon_draws.iter().all(|e| (e - eps).abs() < 1e-15));
}

#[test]
fn identical_subgroups_get_matching_predictive_priors() {
    let cfg = presets::two_trial_config();
    let settings = SamplerSettings::default();
    let r = run_posterior(
        &presets::animal_studies(),
        &[trial("T1", &[]), trial("T2", &[])],
        &cfg,
        &settings,
    )
    .unwrap();
    for j in 0..6 {
        let (m1, se1) = mcse(r.subgroups[0].tox_draws_at(j).unwrap(), settings.n_chains);
        let (m2, se2) = mcse(r.subgroups[1].tox_draws_at(j).unwrap(), settings.n_chains);
        let se = (se1 * se1 + se2 * se2).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se, "dose {j}: {m1} vs {m2} (se {se})");
    }
}

#[test]
fn predictive_priors_have_the_expected_shape() {
    let animal = presets::animal_studies();
    let settings = SamplerSettings::default();
    let single = |w: MixtureWeights| {
        let cfg = presets::config(&[("T1", w)]).unwrap();
        prior_predictive(&animal, &[trial("T1", &[])], &cfg, &settings)
            .unwrap()
            .remove(0)
    };
    let robust = single(MixtureWeights::robust_only(2));
    let at_ref = robust.doses[3];
    assert!(at_ref.lower95 <= 0.05 && at_ref.upper95 >= 0.8, "{at_ref:?}");

    let monkey = single(MixtureWeights::new(vec![0.0, 1.0], 0.0, 0.0).unwrap());
    let m5 = monkey.doses[3].median;
    assert!((0.16..0.33).contains(&m5), "monkey-only median at 5 mg/kg: {m5}");

    let informed = single(presets::animal_weights());
    for d in &informed.doses {
        let b = exnex_core::ess::beta_moment_match(d.mean, d.sd).unwrap();
        assert!(b.ess() < 24.0, "dose {}: prior worth {} patients", d.dose, b.ess());
    }
}

#[test]
fn predictive_prior_rejects_enrolled_trials() {
    let cfg = presets::config(&[("T1", presets::animal_weights())]).unwrap();
    let err = prior_predictive(
        &presets::animal_studies(),
        &[trial("T1", &[(0, 0)])],
        &cfg,
        &SamplerSettings::default(),
    );
    assert!(matches!(err, Err(exnex_core::Error::State(_))));
}

#[test]
fn stored_probabilities_are_open_interval_and_frequencies_sum_to_one() {
    let cfg = presets::two_trial_config();
    let settings = SamplerSettings {
        n_iterations: 3000,
        n_burnin: 1000,
        ..SamplerSettings::default()
    };
    let r = run_posterior(
        &presets::animal_studies(),
        &[trial("T1", &[(0, 0), (1, 3)]), trial("T2", &[(0, 3)])],
        &cfg,
        &settings,
    )
    .unwrap();
    for s in &r.subgroups {
        assert!(s.tox_draws.iter().flatten().all(|p| *p > 0.0 && *p < 1.0));
        let total: f64 = s.component_frequencies.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert!(!r.diagnostics.is_empty());
    assert!(r.diagnostics.iter().all(|d| d.r_hat.is_none_or(|v| !v.is_nan())));
}

#[test]
fn dimension_mismatch_is_a_config_error() {
    let cfg = presets::two_trial_config();
    let err = run_posterior(
        &presets::animal_studies(),
        &[trial("T1", &[])],
        &cfg,
        &SamplerSettings::default(),
    );
    assert!(matches!(err, Err(exnex_core::Error::Config(_))));
}
