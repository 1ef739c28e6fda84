//! Convergence diagnostics.
//!
//! R-hat is the rank-normalized split-R-hat: each chain is split in half,
//! draws are replaced by normal scores of their pooled ranks
//! `Phi^-1((rank - 3/8) / (S + 1/4))`, and the classic potential scale
//! reduction `sqrt(((n-1)/n W + B/n) / W)` is computed on those scores. The
//! same is done on the folded draws `|x - median|` and the maximum of the two
//! is reported. Effective sample size uses the rank-normalized split chains
//! with Geyer's initial monotone sequence estimator.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostic {
    pub name: String,
    /// `None` with a single chain or when the parameter is degenerate.
    pub r_hat: Option<f64>,
    /// `None` when the parameter is degenerate.
    pub ess: Option<f64>,
    /// Zero total variance across all draws.
    pub degenerate: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn split_halves(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect()
}

/// Normal scores of pooled ranks, ties averaged.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, x)| (*x, c, i)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let std = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // 1-based average rank of the tie group
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = std.inverse_cdf((rank - 0.375) / (s + 0.25));
        for item in &pooled[i..=j] {
            out[item.1][item.2] = z;
        }
        i = j + 1;
    }
    out
}

fn classic_r_hat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let b_over_n = variance(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    if w == 0.0 {
        if var_plus == 0.0 {
            return f64::NAN;
        }
        return f64::INFINITY;
    }
    (var_plus / w).sqrt()
}

/// Rank-normalized split-R-hat. Requires at least two chains.
pub fn split_r_hat(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.len() < 2 || total_variance_is_zero(chains) {
        return None;
    }
    let split = split_halves(chains);
    if split[0].len() < 2 {
        return None;
    }
    let bulk = classic_r_hat(&rank_normalize(&split));
    let pooled: Vec<f64> = split.iter().flatten().copied().collect();
    let med = median(&pooled);
    let folded: Vec<Vec<f64>> = split
        .iter()
        .map(|c| c.iter().map(|x| (x - med).abs()).collect())
        .collect();
    let tail = if total_variance_is_zero(&folded) {
        f64::NAN
    } else {
        classic_r_hat(&rank_normalize(&folded))
    };
    Some(match (bulk.is_nan(), tail.is_nan()) {
        (false, false) => bulk.max(tail),
        (false, true) => bulk,
        (true, false) => tail,
        (true, true) => return None,
    })
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn total_variance_is_zero(chains: &[Vec<f64>]) -> bool {
    let mut it = chains.iter().flatten();
    match it.next() {
        Some(first) => it.all(|x| x == first),
        None => true,
    }
}

fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let m = mean(x);
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Bulk effective sample size over all chains (a single chain is allowed).
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.is_empty() || total_variance_is_zero(chains) {
        return None;
    }
    let split = rank_normalize(&split_halves(chains));
    let m = split.len();
    let n = split[0].len();
    if n < 4 {
        return None;
    }
    let nf = n as f64;
    let chain_var: Vec<f64> = split.iter().map(|c| autocovariance(c, 0) * nf / (nf - 1.0)).collect();
    let w = mean(&chain_var);
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let b_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if var_plus <= 0.0 {
        return None;
    }
    let rho = |t: usize| -> f64 {
        let acov = mean(&split.iter().map(|c| autocovariance(c, t)).collect::<Vec<_>>());
        1.0 - (w - acov) / var_plus
    };
    // Geyer: sum consecutive pairs while positive, enforcing monotonicity.
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / (m as f64 * nf).log10().max(1.0));
    Some(m as f64 * nf / tau)
}

pub fn diagnose(name: impl Into<String>, chains: &[Vec<f64>]) -> ParameterDiagnostic {
    let degenerate = total_variance_is_zero(chains);
    ParameterDiagnostic {
        name: name.into(),
        r_hat: if degenerate { None } else { split_r_hat(chains) },
        ess: if degenerate { None } else { effective_sample_size(chains) },
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); shift + z })
            .collect::<Vec<f64>>()
    }

    #[test]
    fn identical_iid_chains_give_r_hat_near_one() {
        let c = iid(1, 5_000, 0.0);
        let r = split_r_hat(&[c.clone(), c]).unwrap();
        assert!(r > 0.99 && r < 1.01, "r_hat = {r}");
    }

    #[test]
    fn disjoint_constant_chains_give_large_r_hat() {
        let r = split_r_hat(&[vec![0.0; 100], vec![10.0; 100]]).unwrap();
        assert!(r > 2.0);
        // rank normalization bounds R-hat for fully separated continuous chains
        let r = split_r_hat(&[iid(2, 1_000, 0.0), iid(3, 1_000, 10.0)]).unwrap();
        assert!(r > 1.5, "r_hat = {r}");
    }

    #[test]
    fn degenerate_parameter_is_flagged_without_nan() {
        let d = diagnose("c", &[vec![1.5; 50], vec![1.5; 50]]);
        assert!(d.degenerate);
        assert_eq!(d.r_hat, None);
        assert_eq!(d.ess, None);
    }

    #[test]
    fn single_chain_has_ess_but_no_r_hat() {
        let d = diagnose("x", &[iid(4, 2_000, 0.0)]);
        assert_eq!(d.r_hat, None);
        let ess = d.ess.unwrap();
        assert!(ess > 1_000.0 && ess < 3_000.0, "ess = {ess}");
    }

    #[test]
    fn autocorrelated_chain_has_smaller_ess() {
        let e = iid(5, 4_000, 0.0);
        let mut ar = vec![0.0; 4_000];
        for i in 1..ar.len() {
            ar[i] = 0.9 * ar[i - 1] + e[i];
        }
        let ess = effective_sample_size(&[ar]).unwrap();
        // AR(1) with phi = 0.9: n (1 - phi) / (1 + phi) ~ 210
        assert!(ess > 100.0 && ess < 450.0, "ess = {ess}");
    }
}
