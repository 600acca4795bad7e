//! Model selection and single-trial analysis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::borrowing::{analyze_proposed, HellingerMatrix, MppPrior, ProposedConfig, WeightMatrix};
use crate::comparators::{analyze_exnex, analyze_no_borrowing, analyze_standard_hm, ExnexPrior, HmPrior};
use crate::error::{Error, Result};
use crate::inference::{posterior_prob_exceeds, DecisionConfig, JointSettings, McmcConfig, PosteriorSummary, VaguePriorConfig};
use crate::trial::BasketTrialData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Standard hierarchical model.
    Hm,
    /// Stand-alone analyses.
    None,
    Exnex,
    /// Hellinger-weighted commensurate borrowing.
    Proposed,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Hm, Model::None, Model::Exnex, Model::Proposed];

    pub fn name(&self) -> &'static str {
        match self {
            Model::Hm => "hm",
            Model::None => "none",
            Model::Exnex => "exnex",
            Model::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Posterior and decision for one subtrial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtrialAnalysis {
    pub k: usize,
    pub summary: PosteriorSummary,
    /// `P(theta_k > delta_u)`.
    pub prob_exceeds: f64,
    pub go: bool,
    /// Posterior exchangeability probability (EXNEX only).
    pub ex_probability: Option<f64>,
}

impl SubtrialAnalysis {
    pub fn decide(
        k: usize,
        summary: PosteriorSummary,
        ex_probability: Option<f64>,
        decision: &DecisionConfig,
    ) -> Result<Self> {
        let prob_exceeds = posterior_prob_exceeds(&summary, decision.delta_u)?;
        Ok(SubtrialAnalysis {
            k,
            summary,
            prob_exceeds,
            go: decision.is_go(prob_exceeds),
            ex_probability,
        })
    }
}

/// Every tunable of the four analysis models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub vague: VaguePriorConfig,
    pub joint: JointSettings,
    pub hm: HmPrior,
    pub exnex: ExnexPrior,
    pub proposed: ProposedConfig,
    pub mcmc: McmcConfig,
    pub decision: DecisionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: Model,
    pub subtrials: Vec<SubtrialAnalysis>,
    /// Borrowing diagnostics, present for the proposed model.
    pub hellinger: Option<HellingerMatrix>,
    pub weights: Option<WeightMatrix>,
    pub priors: Option<Vec<MppPrior>>,
}

pub fn analyze(trial: &BasketTrialData, model: Model, settings: &AnalysisSettings) -> Result<AnalysisReport> {
    let s = settings;
    let mut report = AnalysisReport {
        model,
        subtrials: Vec::new(),
        hellinger: None,
        weights: None,
        priors: None,
    };
    report.subtrials = match model {
        Model::None => analyze_no_borrowing(trial, &s.vague, &s.mcmc, &s.decision)?,
        Model::Hm => analyze_standard_hm(trial, &s.hm, &s.joint, &s.mcmc, &s.decision)?.0,
        Model::Exnex => analyze_exnex(trial, &s.exnex, &s.joint, &s.mcmc, &s.decision)?.0,
        Model::Proposed => {
            let out = analyze_proposed(trial, &s.proposed, &s.vague, &s.joint, &s.mcmc, &s.decision)?;
            report.hellinger = Some(out.hellinger);
            report.weights = Some(out.weights);
            report.priors = Some(out.priors);
            out.subtrials
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for m in Model::ALL {
            assert_eq!(m.name().parse::<Model>().unwrap(), m);
            assert_eq!(m.to_string().to_uppercase().parse::<Model>().unwrap(), m);
        }
        assert!(matches!("bma".parse::<Model>(), Err(Error::UnknownModel(_))));
    }
}
