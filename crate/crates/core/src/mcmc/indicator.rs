use crate::model::{ln_bvn, CovTriple, MixtureWeights};

/// Full-conditional probabilities of the mixture components for one
/// parameter vector: `w_c * phi_2(gamma; mu_c, Sigma_c)` normalized.
///
/// Returns `None` when no component with positive weight has a finite log
/// density at `gamma`.
pub fn indicator_probabilities(
    gamma: [f64; 2],
    components: &[([f64; 2], CovTriple)],
    weights: &MixtureWeights,
) -> Option<Vec<f64>> {
    let w = weights.as_vec();
    assert_eq!(
        w.len(),
        components.len(),
        "one weight per mixture component expected"
    );
    let logs: Vec<f64> = components
        .iter()
        .zip(&w)
        .map(|((mean, cov), wc)| {
            if *wc > 0.0 {
                wc.ln() + ln_bvn(gamma, *mean, *cov)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Some(unnorm.into_iter().map(|u| u / total).collect())
}

fn invert_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (c, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = c;
            acc += p;
            if u < acc {
                return c;
            }
        }
    }
    last_positive
}

/// Draws the component index (0-based, ordered species..., human, robust)
/// from its full conditional using the uniform variate `u` in [0, 1).
///
/// Densities are combined in log space, so this only happens for non-finite
/// `gamma`; the draw then falls back to the prior weights.
pub fn sample_mixture_indicator(
    gamma: [f64; 2],
    components: &[([f64; 2], CovTriple)],
    weights: &MixtureWeights,
    u: f64,
) -> usize {
    match indicator_probabilities(gamma, components, weights) {
        Some(p) => invert_cdf(&p, u),
        None => {
            log::warn!("all mixture densities vanish at {gamma:?}; drawing from prior weights");
            invert_cdf(&weights.as_vec(), u)
        }
    }
}
