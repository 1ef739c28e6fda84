use exnex_core::model::*;
use exnex_core::presets;
use proptest::prelude::*;
use statrs::distribution::{Binomial, Continuous, Discrete, Normal};

// Independent evaluation of the joint density, written from the model
// definition with library distributions and an explicit 2x2 inverse.
// Truncated priors are evaluated as untruncated densities times an
// indicator; the truncation normalizers are constants and are dropped on
// both sides.

fn bvn(x: [f64; 2], mean: [f64; 2], sd: [f64; 2], corr: f64) -> f64 {
    let s11 = sd[0] * sd[0];
    let s22 = sd[1] * sd[1];
    let s12 = corr * sd[0] * sd[1];
    let det = s11 * s22 - s12 * s12;
    let inv = [[s22 / det, -s12 / det], [-s12 / det, s11 / det]];
    let d = [x[0] - mean[0], x[1] - mean[1]];
    let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q
}

fn normal(x: f64, m: f64, s: f64) -> f64 {
    Normal::new(m, s).unwrap().ln_pdf(x)
}

fn binom(n: u32, r: u32, p: f64) -> f64 {
    Binomial::new(p, n as u64).unwrap().ln_pmf(r as u64)
}

fn p_of(a: f64, b: f64, scale: f64, dose: f64, d_ref: f64) -> f64 {
    let eta = a + b.exp() * (scale * dose / d_ref).ln();
    1.0 / (1.0 + (-eta).exp())
}

fn oracle(
    s: &ParameterState,
    animal: &[AnimalStudy],
    human: &[HumanTrialState],
    cfg: &ModelConfig,
) -> LogDensityTerms {
    let d_ref = cfg.reference_dose;
    let k_of = |sp: &str| cfg.species_index(sp).unwrap();
    let delta = |k: usize| {
        let t = &cfg.translation.species[k];
        (t.log_location + t.log_scale * s.delta_z[k]).exp()
    };
    let mut t = LogDensityTerms::default();
    for (i, st) in animal.iter().enumerate() {
        let k = k_of(&st.species);
        for j in 0..st.grid().len() {
            if st.n()[j] == 0 {
                continue;
            }
            let p = p_of(s.theta[i][0], s.theta[i][1], delta(k), st.grid().doses()[j], d_ref);
            t.animal_likelihood += binom(st.n()[j], st.r()[j], p);
        }
        t.study_effects += bvn(s.theta[i], s.mu_species[k], [s.tau[0], s.tau[1]], s.rho);
    }
    for (l, tr) in human.iter().enumerate() {
        let e = &cfg.translation.epsilon[l];
        let eps = if e.fixed { e.mean } else { e.mean + e.sd * s.eps_z[l] };
        for (j, (n, r)) in tr.tallies().into_iter().enumerate() {
            if n > 0 {
                let p = p_of(s.gamma[l][0], s.gamma[l][1], eps, tr.grid().doses()[j], d_ref);
                t.human_likelihood += binom(n, r, p);
            }
        }
        let w = cfg.weights[l].as_vec();
        let nk = cfg.n_species();
        t.subgroup_mixture += match s.indicator[l] {
            Component::Species(k) => {
                w[k].ln() + bvn(s.gamma[l], s.mu_species[k], [s.tau[0], s.tau[1]], s.rho)
            }
            Component::Human => {
                w[nk].ln() + bvn(s.gamma[l], s.mu_human, [s.tau[2], s.tau[3]], s.eta)
            }
            Component::Robust => {
                let nex = &cfg.nex[l];
                w[nk + 1].ln() + bvn(s.gamma[l], nex.mean, nex.sd, nex.corr)
            }
        };
        if !e.fixed {
            t.translation += normal(s.eps_z[l], 0.0, 1.0);
        }
    }
    for mu in &s.mu_species {
        t.species_effects += bvn(*mu, s.m, s.sigma, s.kappa);
    }
    let h = &cfg.hyper;
    for loc in [s.m, s.mu_human] {
        t.hyperpriors += normal(loc[0], h.mean_intercept.mean, h.mean_intercept.sd)
            + normal(loc[1], h.mean_log_slope.mean, h.mean_log_slope.sd);
    }
    for j in 0..4 {
        t.hyperpriors += 2f64.ln() + normal(s.tau[j], 0.0, h.tau_scales[j]);
    }
    for j in 0..2 {
        t.hyperpriors += 2f64.ln() + normal(s.sigma[j], 0.0, h.sigma_scales[j]);
    }
    t.hyperpriors += 3.0 * -(2f64.ln());
    for z in &s.delta_z {
        t.translation += normal(*z, 0.0, 1.0);
    }
    t
}

fn trials(doses_t1: &[(usize, u32)], doses_t2: &[(usize, u32)]) -> Vec<HumanTrialState> {
    let mk = |id: &str, c: &[(usize, u32)]| {
        HumanTrialState::new(id, presets::dose_grid(), 24, 3)
            .unwrap()
            .with_cohorts(c.iter().map(|(d, r)| Cohort {
                dose_index: *d,
                n_treated: 3,
                n_dlt: *r,
            }))
            .unwrap()
    };
    vec![mk("T1", doses_t1), mk("T2", doses_t2)]
}

prop_compose! {
    fn pair()(a in -3.0..1.0f64, b in -1.5..1.0f64) -> [f64; 2] { [a, b] }
}

prop_compose! {
    fn state(n_studies: usize)(
        theta in prop::collection::vec(pair(), n_studies),
        mu in prop::collection::vec(pair(), 2),
        m in pair(),
        mu_h in pair(),
        gamma in prop::collection::vec(pair(), 2),
        ind in prop::collection::vec(0usize..4, 2),
        delta_z in prop::collection::vec(-2.5..2.5f64, 2),
        eps_z in prop::collection::vec(-3.0..3.0f64, 2),
        tau in prop::array::uniform4(0.05..1.2f64),
        sigma in prop::array::uniform2(0.05..2.0f64),
        corr in prop::array::uniform3(-0.95..0.95f64),
    ) -> ParameterState {
        ParameterState {
            theta, mu_species: mu, m, mu_human: mu_h, gamma,
            indicator: ind.into_iter().map(|c| Component::from_index(c, 2)).collect(),
            delta_z, eps_z, tau, sigma, rho: corr[0], kappa: corr[1], eta: corr[2],
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_term_matches_the_oracle(s in state(5), r1 in 0u32..4, r2 in 0u32..4) {
        let animal = presets::animal_studies();
        let human = trials(&[(0, 0), (1, r1), (2, r2)], &[(0, r2), (3, 3)]);
        let cfg = presets::two_trial_config();
        let got = Problem::new(&animal, &human, &cfg).unwrap().log_density_terms(&s).unwrap();
        let want = oracle(&s, &animal, &human, &cfg);
        prop_assert!(close(got.animal_likelihood, want.animal_likelihood), "{got:?} vs {want:?}");
        prop_assert!(close(got.human_likelihood, want.human_likelihood));
        prop_assert!(close(got.study_effects, want.study_effects));
        prop_assert!(close(got.species_effects, want.species_effects));
        prop_assert!(close(got.subgroup_mixture, want.subgroup_mixture));
        prop_assert!(close(got.hyperpriors, want.hyperpriors));
        prop_assert!(close(got.translation, want.translation));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn relabeling_studies_and_subgroups_leaves_density_unchanged(
        s in state(5),
        perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
        r in 0u32..4,
    ) {
        let animal = presets::animal_studies();
        let human = trials(&[(0, 0), (1, r)], &[(2, 1)]);
        let cfg = presets::config(&[
            ("T1", presets::bridged_weights()),
            ("T2", MixtureWeights::new(vec![0.3, 0.3], 0.3, 0.1).unwrap()),
        ]).unwrap();
        let base = log_joint_density(&s, &animal, &human, &cfg).unwrap();

        // permute animal studies together with their random effects
        let animal_p: Vec<AnimalStudy> = perm.iter().map(|i| animal[*i].clone()).collect();
        let mut s_p = s.clone();
        s_p.theta = perm.iter().map(|i| s.theta[*i]).collect();
        let permuted = log_joint_density(&s_p, &animal_p, &human, &cfg).unwrap();
        prop_assert!(close(base, permuted));

        // swap the two subgroups, carrying their parameters and priors along
        let mut cfg_sw = cfg.clone();
        cfg_sw.subgroups.swap(0, 1);
        cfg_sw.weights.swap(0, 1);
        cfg_sw.nex.swap(0, 1);
        cfg_sw.translation.epsilon.swap(0, 1);
        let human_sw = vec![human[1].clone(), human[0].clone()];
        let mut s_sw = s.clone();
        s_sw.gamma.swap(0, 1);
        s_sw.indicator.swap(0, 1);
        s_sw.eps_z.swap(0, 1);
        let swapped = log_joint_density(&s_sw, &animal, &human_sw, &cfg_sw).unwrap();
        prop_assert!(close(base, swapped));

        // swap the species order
        let mut cfg_sp = cfg.clone();
        cfg_sp.translation.species.swap(0, 1);
        cfg_sp.weights = cfg.weights.iter().map(|w| {
            MixtureWeights::new(vec![w.species()[1], w.species()[0]], w.human(), w.robust()).unwrap()
        }).collect();
        let mut s_sp = s.clone();
        s_sp.mu_species.swap(0, 1);
        s_sp.delta_z.swap(0, 1);
        s_sp.indicator = s.indicator.iter().map(|c| match c {
            Component::Species(k) => Component::Species(1 - k),
            other => *other,
        }).collect();
        let species_swapped = log_joint_density(&s_sp, &animal, &human, &cfg_sp).unwrap();
        prop_assert!(close(base, species_swapped));
    }

    #[test]
    fn tox_prob_increases_with_dose(
        a in -10.0..10.0f64,
        b in -5.0..3.0f64,
        scale in 0.05..5.0f64,
        d1 in 0.01..100.0f64,
        ratio in 1.0001..50.0f64,
    ) {
        let d2 = d1 * ratio;
        let p1 = tox_prob(a, b, scale, d1, 5.0).unwrap();
        let p2 = tox_prob(a, b, scale, d2, 5.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2));
        prop_assert!(p2 >= p1, "p({d1})={p1} > p({d2})={p2}");
    }
}

#[test]
fn doubling_counts_doubles_the_likelihood_kernel() {
    let cfg = presets::config(&[("T1", presets::animal_weights())]).unwrap();
    let human = vec![HumanTrialState::new("T1", presets::dose_grid(), 24, 3).unwrap()];
    let animal = presets::animal_studies();
    let doubled: Vec<AnimalStudy> = animal.iter().map(|s| s.scaled_counts(2)).collect();
    let p1 = Problem::new(&animal, &human, &cfg).unwrap();
    let p2 = Problem::new(&doubled, &human, &cfg).unwrap();
    let base = ParameterState::central(&cfg, &p1.species_of_studies());
    let mut moved = base.clone();
    moved.theta[0] = [-0.4, 0.3];
    moved.theta[3] = [-2.0, -0.2];
    moved.delta_z = vec![0.7, -1.1];
    let diff = |p: &Problem| {
        p.log_density_terms(&moved).unwrap().animal_likelihood
            - p.log_density_terms(&base).unwrap().animal_likelihood
    };
    let (d1, d2) = (diff(&p1), diff(&p2));
    assert!((d2 - 2.0 * d1).abs() < 1e-9 * d1.abs().max(1.0), "{d1} vs {d2}");
}

#[test]
fn out_of_bounds_states_have_zero_density() {
    let cfg = presets::two_trial_config();
    let human = trials(&[], &[]);
    let animal = presets::animal_studies();
    let p = Problem::new(&animal, &human, &cfg).unwrap();
    let ok = ParameterState::central(&cfg, &p.species_of_studies());
    assert!(p.log_density_terms(&ok).unwrap().total().is_finite());
    let mut bad = ok.clone();
    bad.m = [10.5, 0.0];
    assert_eq!(p.log_density_terms(&bad).unwrap().total(), f64::NEG_INFINITY);
    let mut bad = ok.clone();
    bad.tau[1] = 0.0005;
    assert_eq!(p.log_density_terms(&bad).unwrap().total(), f64::NEG_INFINITY);
    let mut bad = ok.clone();
    bad.eps_z[0] = 4.0;
    assert_eq!(p.log_density_terms(&bad).unwrap().total(), f64::NEG_INFINITY);
    let mut bad = ok;
    bad.theta.pop();
    assert!(p.log_density_terms(&bad).is_err());
}
