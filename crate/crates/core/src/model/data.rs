use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered dose levels (mg/kg) together with the reference dose shared by
/// every study in an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseGrid {
    doses: Vec<f64>,
    reference_dose: f64,
}

impl DoseGrid {
    pub fn new(doses: Vec<f64>, reference_dose: f64) -> Result<Self> {
        if doses.is_empty() {
            return Err(Error::InvalidData("dose grid is empty".into()));
        }
        if !(reference_dose > 0.0 && reference_dose.is_finite()) {
            return Err(Error::InvalidData(format!(
                "reference dose must be positive, got {reference_dose}"
            )));
        }
        if let Some(d) = doses.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidData(format!("dose {d} is not positive")));
        }
        if doses.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidData("doses must be sorted non-decreasing".into()));
        }
        Ok(Self {
            doses,
            reference_dose,
        })
    }

    pub fn doses(&self) -> &[f64] {
        &self.doses
    }

    pub fn reference_dose(&self) -> f64 {
        self.reference_dose
    }

    pub fn len(&self) -> usize {
        self.doses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }

    /// `ln(d / d_ref)` for every grid dose.
    pub fn log_relative_doses(&self) -> Vec<f64> {
        self.doses
            .iter()
            .map(|d| (d / self.reference_dose).ln())
            .collect()
    }
}

/// Dose-toxicity data from one preclinical study in one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimalStudy {
    pub study_id: String,
    pub species: String,
    grid: DoseGrid,
    n: Vec<u32>,
    r: Vec<u32>,
}

impl AnimalStudy {
    pub fn new(
        study_id: impl Into<String>,
        species: impl Into<String>,
        grid: DoseGrid,
        n: Vec<u32>,
        r: Vec<u32>,
    ) -> Result<Self> {
        let study_id = study_id.into();
        if n.len() != grid.len() || r.len() != grid.len() {
            return Err(Error::InvalidData(format!(
                "study {study_id}: {} doses but {} subject counts and {} DLT counts",
                grid.len(),
                n.len(),
                r.len()
            )));
        }
        if let Some(j) = (0..n.len()).find(|&j| r[j] > n[j]) {
            return Err(Error::InvalidData(format!(
                "study {study_id}: dose {} has {} DLTs among {} subjects",
                grid.doses()[j],
                r[j],
                n[j]
            )));
        }
        Ok(Self {
            study_id,
            species: species.into(),
            grid,
            n,
            r,
        })
    }

    pub fn grid(&self) -> &DoseGrid {
        &self.grid
    }

    pub fn n(&self) -> &[u32] {
        &self.n
    }

    pub fn r(&self) -> &[u32] {
        &self.r
    }

    /// Copy of this study with every count multiplied by `factor`.
    pub fn scaled_counts(&self, factor: u32) -> Self {
        Self {
            n: self.n.iter().map(|v| v * factor).collect(),
            r: self.r.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Outcome of one cohort treated at a single grid dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub dose_index: usize,
    pub n_treated: u32,
    pub n_dlt: u32,
}

/// Accrual history of the phase I trial in one human subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanTrialState {
    pub subgroup_id: String,
    grid: DoseGrid,
    cohorts: Vec<Cohort>,
    max_sample_size: u32,
    cohort_size: u32,
}

impl HumanTrialState {
    pub fn new(
        subgroup_id: impl Into<String>,
        grid: DoseGrid,
        max_sample_size: u32,
        cohort_size: u32,
    ) -> Result<Self> {
        if max_sample_size == 0 || cohort_size == 0 {
            return Err(Error::InvalidData(
                "max sample size and cohort size must be positive".into(),
            ));
        }
        Ok(Self {
            subgroup_id: subgroup_id.into(),
            grid,
            cohorts: Vec::new(),
            max_sample_size,
            cohort_size,
        })
    }

    pub fn with_cohorts(mut self, cohorts: impl IntoIterator<Item = Cohort>) -> Result<Self> {
        for c in cohorts {
            self.push_cohort(c)?;
        }
        Ok(self)
    }

    pub fn grid(&self) -> &DoseGrid {
        &self.grid
    }

    pub fn cohorts(&self) -> &[Cohort] {
        &self.cohorts
    }

    pub fn max_sample_size(&self) -> u32 {
        self.max_sample_size
    }

    pub fn cohort_size(&self) -> u32 {
        self.cohort_size
    }

    /// Validates and appends a cohort.
    pub fn push_cohort(&mut self, cohort: Cohort) -> Result<()> {
        if cohort.dose_index >= self.grid.len() {
            return Err(Error::InvalidData(format!(
                "dose index {} outside grid of {} doses",
                cohort.dose_index,
                self.grid.len()
            )));
        }
        if cohort.n_dlt > cohort.n_treated {
            return Err(Error::InvalidData(format!(
                "cohort has {} DLTs among {} patients",
                cohort.n_dlt, cohort.n_treated
            )));
        }
        let total = self.total_treated() + cohort.n_treated;
        if total > self.max_sample_size {
            return Err(Error::State(format!(
                "cohort would bring accrual to {total}, above the maximum {}",
                self.max_sample_size
            )));
        }
        self.cohorts.push(cohort);
        Ok(())
    }

    /// Per-dose cumulative (treated, DLT) tallies, folded over the cohorts.
    pub fn tallies(&self) -> Vec<(u32, u32)> {
        self.cohorts
            .iter()
            .fold(vec![(0, 0); self.grid.len()], |mut acc, c| {
                acc[c.dose_index].0 += c.n_treated;
                acc[c.dose_index].1 += c.n_dlt;
                acc
            })
    }

    pub fn total_treated(&self) -> u32 {
        self.cohorts.iter().map(|c| c.n_treated).sum()
    }

    pub fn total_dlt(&self) -> u32 {
        self.cohorts.iter().map(|c| c.n_dlt).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.total_treated() >= self.max_sample_size
    }

    pub fn highest_administered(&self) -> Option<usize> {
        self.cohorts
            .iter()
            .filter(|c| c.n_treated > 0)
            .map(|c| c.dose_index)
            .max()
    }

    pub fn current_dose(&self) -> Option<usize> {
        self.cohorts.last().map(|c| c.dose_index)
    }

    pub fn administered(&self) -> Vec<bool> {
        self.tallies().iter().map(|(n, _)| *n > 0).collect()
    }

    /// Concatenates the cohorts of `other` ahead of this trial's own cohorts,
    /// treating both as one subgroup. Grids must agree.
    pub fn pooled_with(&self, other: &HumanTrialState) -> Result<HumanTrialState> {
        if other.grid != self.grid {
            return Err(Error::InvalidData("cannot pool trials on different grids".into()));
        }
        let mut pooled = HumanTrialState::new(
            self.subgroup_id.clone(),
            self.grid.clone(),
            self.max_sample_size + other.max_sample_size,
            self.cohort_size,
        )?;
        for c in other.cohorts.iter().chain(self.cohorts.iter()) {
            pooled.push_cohort(*c)?;
        }
        Ok(pooled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> DoseGrid {
        DoseGrid::new(vec![0.1, 0.5, 1.0, 5.0, 10.0, 20.0], 5.0).unwrap()
    }

    #[test]
    fn grid_rejects_unsorted_and_nonpositive() {
        assert!(DoseGrid::new(vec![1.0, 0.5], 5.0).is_err());
        assert!(DoseGrid::new(vec![0.0, 0.5], 5.0).is_err());
        assert!(DoseGrid::new(vec![0.5], 0.0).is_err());
        assert!(DoseGrid::new(vec![0.5, 0.5], 5.0).is_ok());
    }

    #[test]
    fn study_rejects_more_dlts_than_subjects() {
        let g = DoseGrid::new(vec![10.0], 5.0).unwrap();
        let err = AnimalStudy::new("m1", "Monkey", g, vec![6], vec![7]).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn tallies_fold_over_cohorts() {
        let t = HumanTrialState::new("T1", grid(), 24, 3)
            .unwrap()
            .with_cohorts([
                Cohort { dose_index: 0, n_treated: 3, n_dlt: 0 },
                Cohort { dose_index: 1, n_treated: 3, n_dlt: 1 },
                Cohort { dose_index: 1, n_treated: 3, n_dlt: 0 },
            ])
            .unwrap();
        assert_eq!(t.tallies(), vec![(3, 0), (6, 1), (0, 0), (0, 0), (0, 0), (0, 0)]);
        assert_eq!(t.highest_administered(), Some(1));
        assert_eq!(t.total_treated(), 9);
    }

    #[test]
    fn accrual_capped_at_max_sample_size() {
        let mut t = HumanTrialState::new("T1", grid(), 6, 3).unwrap();
        let c = Cohort { dose_index: 0, n_treated: 3, n_dlt: 0 };
        t.push_cohort(c).unwrap();
        t.push_cohort(c).unwrap();
        assert!(t.is_complete());
        assert!(matches!(t.push_cohort(c), Err(Error::State(_))));
    }
}
