use serde::{Deserialize, Serialize};

use super::diagnostics::ParameterDiagnostic;
use crate::error::{Error, Result};

/// Streaming mean and standard deviation (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningSummary {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningSummary {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two summaries (Chan et al. parallel update).
    pub fn merge(&self, other: &RunningSummary) -> RunningSummary {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        RunningSummary { count: n, mean, m2 }
    }

    /// Sample standard deviation.
    pub fn sd(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count as f64 - 1.0)).sqrt()
        }
    }
}

/// Posterior output for one human subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupPosterior {
    pub subgroup_id: String,
    pub doses: Vec<f64>,
    /// Stored DLT-probability draws, one vector per grid dose.
    pub tox_draws: Vec<Vec<f64>>,
    /// Mean and sd of the DLT probability per dose over every retained draw.
    pub tox_summary: Vec<RunningSummary>,
    pub gamma_draws: Vec<[f64; 2]>,
    pub epsilon_draws: Vec<f64>,
    /// Labels of the mixture components (species..., Human, Robust).
    pub component_labels: Vec<String>,
    /// Posterior frequency of each mixture component over every retained draw.
    pub component_frequencies: Vec<f64>,
}

impl SubgroupPosterior {
    pub fn tox_draws_at(&self, dose_index: usize) -> Result<&[f64]> {
        self.tox_draws
            .get(dose_index)
            .filter(|d| !d.is_empty())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("posterior has no draws for dose {dose_index}")))
    }

    pub fn epsilon_mean(&self) -> f64 {
        self.epsilon_draws.iter().sum::<f64>() / self.epsilon_draws.len().max(1) as f64
    }
}

/// Acceptance rate of one update block after burn-in, averaged over chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub block: String,
    pub rate: f64,
}

/// Draws and summaries from one posterior run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResult {
    pub subgroups: Vec<SubgroupPosterior>,
    pub diagnostics: Vec<ParameterDiagnostic>,
    pub acceptance: Vec<BlockAcceptance>,
    pub n_chains: usize,
    pub retained_per_chain: usize,
    /// Within-chain iteration index of each stored draw (chains concatenated).
    pub stored_iterations: Vec<usize>,
}

impl PosteriorResult {
    pub fn subgroup(&self, id: &str) -> Result<&SubgroupPosterior> {
        self.subgroups
            .iter()
            .find(|s| s.subgroup_id == id)
            .ok_or_else(|| Error::Config(format!("posterior has no subgroup {id}")))
    }
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and central 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

impl QuantileSummary {
    pub fn from_draws(draws: &[f64]) -> Self {
        let mut v = draws.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            median: quantile(&v, 0.5),
            lower95: quantile(&v, 0.025),
            upper95: quantile(&v, 0.975),
        }
    }
}

/// Per-dose summary of a DLT-probability distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseSummary {
    pub dose: f64,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSummary {
    pub subgroup_id: String,
    pub doses: Vec<DoseSummary>,
    /// Monte-Carlo draws behind each summary (retained, all chains).
    pub n_draws: u64,
}

impl SubgroupPosterior {
    pub fn summary(&self) -> SubgroupSummary {
        let doses = self
            .doses
            .iter()
            .zip(&self.tox_draws)
            .zip(&self.tox_summary)
            .map(|((d, draws), run)| {
                let q = QuantileSummary::from_draws(draws);
                DoseSummary {
                    dose: *d,
                    mean: run.mean,
                    sd: run.sd(),
                    median: q.median,
                    lower95: q.lower95,
                    upper95: q.upper95,
                }
            })
            .collect();
        SubgroupSummary {
            subgroup_id: self.subgroup_id.clone(),
            doses,
            n_draws: self.tox_summary.first().map_or(0, |s| s.count),
        }
    }
}

impl PosteriorResult {
    pub fn summaries(&self) -> Vec<SubgroupSummary> {
        self.subgroups.iter().map(SubgroupPosterior::summary).collect()
    }
}
