//! Prior effective sample size by moment-matching a Beta distribution.
//!
//! A DLT-probability distribution with mean `m` and standard deviation `s` is
//! matched to `Beta(a, b)` with `a + b = m (1 - m) / s^2 - 1`; the effective
//! sample size is `a + b`. The match only exists when `s^2 < m (1 - m)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::SubgroupSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaApprox {
    pub a: f64,
    pub b: f64,
    pub source_mean: f64,
    pub source_sd: f64,
}

impl BetaApprox {
    pub fn ess(&self) -> f64 {
        self.a + self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn sd(&self) -> f64 {
        let n = self.a + self.b;
        (self.a * self.b / (n * n * (n + 1.0))).sqrt()
    }
}

pub fn beta_moment_match(mean: f64, sd: f64) -> Result<BetaApprox> {
    if !(mean > 0.0 && mean < 1.0) || !sd.is_finite() || sd <= 0.0 {
        return Err(Error::Domain(format!(
            "beta moment match needs mean in (0,1) and sd > 0, got mean={mean} sd={sd}"
        )));
    }
    let variance = sd * sd;
    let bound = mean * (1.0 - mean);
    if variance >= bound {
        return Err(Error::Infeasible { variance, bound });
    }
    let nu = bound / variance - 1.0;
    Ok(BetaApprox {
        a: mean * nu,
        b: (1.0 - mean) * nu,
        source_mean: mean,
        source_sd: sd,
    })
}

/// One cell of an ESS table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssRow {
    pub subgroup_id: String,
    pub dose: f64,
    pub mean: f64,
    pub sd: f64,
    /// `None` when the moment match is infeasible.
    pub beta: Option<BetaApprox>,
    pub ess: Option<f64>,
}

/// ESS per subgroup and dose; infeasible cells are kept and flagged rather
/// than aborting the report.
pub fn ess_report(summaries: &[SubgroupSummary]) -> Vec<EssRow> {
    summaries
        .iter()
        .flat_map(|s| {
            s.doses.iter().map(move |d| {
                let beta = beta_moment_match(d.mean, d.sd).ok();
                EssRow {
                    subgroup_id: s.subgroup_id.clone(),
                    dose: d.dose,
                    mean: d.mean,
                    sd: d.sd,
                    ess: beta.map(|b| b.ess()),
                    beta,
                }
            })
        })
        .collect()
}
