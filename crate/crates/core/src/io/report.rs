use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{to_json_string, SCHEMA_VERSION};
use crate::decision::{
    declare_mtd, dose_profile, recommend_next_dose, starting_dose, DecisionKind,
    IntervalThresholds,
};
use crate::error::{Error, Result};
use crate::mcmc::{PosteriorResult, QuantileSummary};
use crate::model::HumanTrialState;
use crate::sim::OcReport;

/// Rounds to the four decimals used in every report.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseRow {
    pub dose: f64,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
    pub p_under: f64,
    pub p_target: f64,
    pub p_over: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeight {
    pub component: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub subgroup_id: String,
    pub n_treated: u32,
    pub n_dlt: u32,
    pub doses: Vec<DoseRow>,
    /// Posterior weight of each mixture component.
    pub components: Vec<ComponentWeight>,
    pub epsilon: EpsilonSummary,
}

/// Posterior summaries rounded for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub schema_version: String,
    pub subgroups: Vec<SubgroupReport>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Summaries of every subgroup in `trials`, in that order.
pub fn posterior_report(
    posterior: &PosteriorResult,
    trials: &[HumanTrialState],
    thresholds: &IntervalThresholds,
) -> Result<PosteriorReport> {
    let subgroups = trials
        .iter()
        .map(|t| {
            let sub = posterior.subgroup(&t.subgroup_id)?;
            let profile = dose_profile(posterior, &t.subgroup_id, sub.doses.len(), thresholds)?;
            let doses = sub
                .summary()
                .doses
                .iter()
                .zip(&profile)
                .map(|(d, ip)| DoseRow {
                    dose: d.dose,
                    mean: round4(d.mean),
                    sd: round4(d.sd),
                    median: round4(d.median),
                    lower95: round4(d.lower95),
                    upper95: round4(d.upper95),
                    p_under: round4(ip.under),
                    p_target: round4(ip.target),
                    p_over: round4(ip.over),
                })
                .collect();
            let (mean, sd) = mean_sd(&sub.epsilon_draws);
            if sub.epsilon_draws.is_empty() {
                return Err(Error::State(format!("no ε draws for {}", t.subgroup_id)));
            }
            let q = QuantileSummary::from_draws(&sub.epsilon_draws);
            Ok(SubgroupReport {
                subgroup_id: t.subgroup_id.clone(),
                n_treated: t.total_treated(),
                n_dlt: t.total_dlt(),
                doses,
                components: sub
                    .component_labels
                    .iter()
                    .zip(&sub.component_frequencies)
                    .map(|(c, w)| ComponentWeight {
                        component: c.clone(),
                        weight: round4(*w),
                    })
                    .collect(),
                epsilon: EpsilonSummary {
                    mean: round4(mean),
                    sd: round4(sd),
                    median: round4(q.median),
                    lower95: round4(q.lower95),
                    upper95: round4(q.upper95),
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(PosteriorReport {
        schema_version: SCHEMA_VERSION.into(),
        subgroups,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub dose: f64,
    pub p_under: f64,
    pub p_target: f64,
    pub p_over: f64,
    pub admissible: bool,
}

/// Next-dose recommendation for one subgroup. Before any cohort this is the
/// starting dose; after the last cohort it carries the declared MTD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationReport {
    pub schema_version: String,
    pub subgroup_id: String,
    pub n_cohorts: usize,
    pub n_treated: u32,
    pub decision: DecisionKind,
    pub dose_index: Option<usize>,
    pub dose: Option<f64>,
    pub mtd_index: Option<usize>,
    pub mtd_dose: Option<f64>,
    pub rationale: Vec<IntervalRow>,
}

pub fn recommendation_report(
    posterior: &PosteriorResult,
    trial: &HumanTrialState,
    thresholds: &IntervalThresholds,
    no_skipping: bool,
) -> Result<RecommendationReport> {
    let decision = if trial.cohorts().is_empty() {
        starting_dose(posterior, &trial.subgroup_id, thresholds)?
    } else {
        recommend_next_dose(posterior, trial, thresholds, no_skipping)?
    };
    let mtd = if decision.kind == DecisionKind::Complete {
        declare_mtd(posterior, trial, thresholds)?
    } else {
        None
    };
    let doses = trial.grid().doses();
    Ok(RecommendationReport {
        schema_version: SCHEMA_VERSION.into(),
        subgroup_id: trial.subgroup_id.clone(),
        n_cohorts: trial.cohorts().len(),
        n_treated: trial.total_treated(),
        decision: decision.kind,
        dose_index: decision.dose_index,
        dose: decision.dose_index.map(|j| doses[j]),
        mtd_index: mtd,
        mtd_dose: mtd.map(|j| doses[j]),
        rationale: decision
            .rationale
            .iter()
            .zip(doses)
            .map(|(ip, d)| IntervalRow {
                dose: *d,
                p_under: round4(ip.under),
                p_target: round4(ip.target),
                p_over: round4(ip.over),
                admissible: ip.over <= thresholds.feasibility_bound,
            })
            .collect(),
    })
}

/// Canonical serialisation shared by the command line and the service, so
/// both emit identical bytes for the same recommendation.
pub fn recommendation_json(report: &RecommendationReport) -> Result<String> {
    to_json_string(report)
}

pub fn format_posterior_report(report: &PosteriorReport) -> String {
    let mut s = String::new();
    for g in &report.subgroups {
        let _ = writeln!(
            s,
            "Subgroup {} ({} treated, {} DLTs)",
            g.subgroup_id, g.n_treated, g.n_dlt
        );
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>8} {:>17} {:>8} {:>8} {:>8}",
            "dose", "mean", "median", "95% interval", "P(under)", "P(target)", "P(over)"
        );
        for d in &g.doses {
            let _ = writeln!(
                s,
                "{:>8} {:>8.4} {:>8.4} [{:.4}, {:.4}] {:>8.4} {:>9.4} {:>8.4}",
                d.dose, d.mean, d.median, d.lower95, d.upper95, d.p_under, d.p_target, d.p_over
            );
        }
        let weights: Vec<String> = g
            .components
            .iter()
            .map(|c| format!("{} {:.4}", c.component, c.weight))
            .collect();
        let _ = writeln!(s, "mixture weights: {}", weights.join(", "));
        let _ = writeln!(
            s,
            "epsilon: mean {:.4}, sd {:.4}, 95% interval [{:.4}, {:.4}]\n",
            g.epsilon.mean, g.epsilon.sd, g.epsilon.lower95, g.epsilon.upper95
        );
    }
    s
}

pub fn format_simulation_report(reports: &[OcReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "{} | model {} | {} replicates", r.scenario, r.variant, r.n_replicates);
        for g in &r.subgroups {
            let mtd: Vec<String> = g.pct_mtd.iter().map(|p| format!("{p:.1}")).collect();
            let pat: Vec<String> = g.mean_patients.iter().map(|p| format!("{p:.2}")).collect();
            let _ = writeln!(
                s,
                "  {}: PCS {:.1}%  stopped {:.1}%  no MTD {:.1}%  MTD% [{}]",
                g.subgroup_id,
                g.pcs,
                g.pct_stopped_early,
                g.pct_no_mtd,
                mtd.join(", ")
            );
            let _ = writeln!(
                s,
                "      patients [{}] (total {:.2})  DLTs {:.2}  mean ε {}  no-skipping violations {}",
                pat.join(", "),
                g.mean_total_patients,
                g.mean_dlts,
                g.mean_epsilon_completed
                    .map_or("n/a".to_string(), |e| format!("{e:.4}")),
                g.no_skipping_violations
            );
        }
    }
    s
}
