//! Trial data structures, simulation scenarios and data generation.

mod generate;
mod io;
mod scenario;

pub use generate::{assign_treatment, generate_subtrial, generate_trial};
pub use io::{read_trial_csv, write_trial_csv};
pub use scenario::{load_scenarios, parse_scenarios, resolve_scenario, scenarios_to_toml, write_scenarios, Scenario};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patient-level data of one subtrial.
///
/// `covariates` is row-major: one inner vector of length `q` per patient.
/// An intercept is added by the models, so it is not stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtrialData {
    pub k: usize,
    pub y: Vec<f64>,
    pub covariates: Vec<Vec<f64>>,
    pub treatment: Vec<u8>,
}

impl SubtrialData {
    pub fn new(
        k: usize,
        y: Vec<f64>,
        covariates: Vec<Vec<f64>>,
        treatment: Vec<u8>,
    ) -> Result<Self> {
        let data = SubtrialData {
            k,
            y,
            covariates,
            treatment,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "subtrial {} has {} patients, need at least 2",
                self.k, n
            )));
        }
        if self.covariates.len() != n || self.treatment.len() != n {
            return Err(Error::InvalidData(format!(
                "subtrial {}: y, covariates and treatment lengths differ ({}, {}, {})",
                self.k,
                n,
                self.covariates.len(),
                self.treatment.len()
            )));
        }
        let q = self.covariates[0].len();
        if self.covariates.iter().any(|row| row.len() != q) {
            return Err(Error::InvalidData(format!(
                "subtrial {}: ragged covariate rows",
                self.k
            )));
        }
        if let Some(t) = self.treatment.iter().find(|&&t| t > 1) {
            return Err(Error::InvalidData(format!(
                "subtrial {}: treatment indicator {} is not 0 or 1",
                self.k, t
            )));
        }
        let finite = self.y.iter().all(|v| v.is_finite())
            && self.covariates.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidData(format!(
                "subtrial {}: non-finite values",
                self.k
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariates.first().map_or(0, Vec::len)
    }

    /// Number of regression coefficients: intercept, covariates, treatment.
    pub fn num_coefficients(&self) -> usize {
        self.num_covariates() + 2
    }

    /// Design row `[1, z_1 .. z_q, T]` for patient `i`.
    pub fn design_row(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(1.0)
            .chain(self.covariates[i].iter().copied())
            .chain(std::iter::once(f64::from(self.treatment[i])))
    }

    pub fn treated_count(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1).count()
    }
}

/// All subtrials of one basket trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasketTrialData {
    pub subtrials: Vec<SubtrialData>,
}

impl BasketTrialData {
    /// Subtrial indices must be exactly `1..=K` (in any order) and every
    /// subtrial must have the same number of covariates.
    pub fn new(subtrials: Vec<SubtrialData>) -> Result<Self> {
        if subtrials.is_empty() {
            return Err(Error::InvalidData("a trial needs at least one subtrial".into()));
        }
        let k = subtrials.len();
        let mut seen = vec![false; k];
        for s in &subtrials {
            s.validate()?;
            if s.k == 0 || s.k > k || seen[s.k - 1] {
                return Err(Error::InvalidData(format!(
                    "subtrial indices must be 1..={k} without duplicates (got {})",
                    s.k
                )));
            }
            seen[s.k - 1] = true;
        }
        let q = subtrials[0].num_covariates();
        if subtrials.iter().any(|s| s.num_covariates() != q) {
            return Err(Error::InvalidData(
                "subtrials disagree on the number of covariates".into(),
            ));
        }
        Ok(BasketTrialData { subtrials })
    }

    pub fn num_subtrials(&self) -> usize {
        self.subtrials.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.subtrials[0].num_covariates()
    }

    pub fn total_patients(&self) -> usize {
        self.subtrials.iter().map(SubtrialData::len).sum()
    }

    /// All patients merged into one subtrial labelled `1`, ignoring subgroup
    /// membership (complete pooling).
    pub fn pooled(&self) -> SubtrialData {
        let mut y = Vec::with_capacity(self.total_patients());
        let mut covariates = Vec::with_capacity(self.total_patients());
        let mut treatment = Vec::with_capacity(self.total_patients());
        for s in &self.subtrials {
            y.extend_from_slice(&s.y);
            covariates.extend(s.covariates.iter().cloned());
            treatment.extend_from_slice(&s.treatment);
        }
        SubtrialData {
            k: 1,
            y,
            covariates,
            treatment,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(k: usize) -> SubtrialData {
        SubtrialData::new(
            k,
            vec![1.0, 2.0],
            vec![vec![6.0, 4.0], vec![6.1, 3.9]],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_treatment_and_lengths() {
        let err = SubtrialData::new(1, vec![1.0, 2.0], vec![vec![0.0], vec![0.0]], vec![0, 2]);
        assert!(matches!(err, Err(Error::InvalidData(_))));
        let err = SubtrialData::new(1, vec![1.0, 2.0], vec![vec![0.0]], vec![0, 1]);
        assert!(err.is_err());
        let err = SubtrialData::new(1, vec![1.0], vec![vec![0.0]], vec![0]);
        assert!(err.is_err());
        let err = SubtrialData::new(1, vec![1.0, f64::NAN], vec![vec![0.0], vec![1.0]], vec![0, 1]);
        assert!(err.is_err());
    }

    #[test]
    fn trial_indices_must_cover_one_to_k() {
        assert!(BasketTrialData::new(vec![tiny(2), tiny(1)]).is_ok());
        assert!(BasketTrialData::new(vec![tiny(1), tiny(1)]).is_err());
        assert!(BasketTrialData::new(vec![tiny(1), tiny(3)]).is_err());
        assert!(BasketTrialData::new(vec![]).is_err());
    }

    #[test]
    fn design_row_layout() {
        let s = tiny(1);
        let row: Vec<f64> = s.design_row(1).collect();
        assert_eq!(row, vec![1.0, 6.1, 3.9, 1.0]);
        assert_eq!(s.num_coefficients(), 4);
    }
}
