//! Benchmark analyses: stand-alone fits without borrowing, the standard
//! hierarchical model and the EXNEX mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::inference::{
    fit_standalone, DecisionConfig, JointFit, JointModel, JointSettings, McmcConfig, NormalPrior,
    StandaloneFit, ThetaLayer, VaguePriorConfig,
};
use crate::model::SubtrialAnalysis;
use crate::rng::{derive_seed, tag};
use crate::trial::BasketTrialData;

/// `gamma_jk ~ N(chi_j, eps_j²)`, `chi_j ~ chi`, `eps_j ~ HN(epsilon_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectsPrior {
    pub chi: NormalPrior,
    pub epsilon_scale: f64,
    /// Random-walk step on `ln eps`.
    pub step: f64,
}

impl Default for RandomEffectsPrior {
    fn default() -> Self {
        RandomEffectsPrior {
            chi: NormalPrior { mean: 0.0, sd: 5.0 },
            epsilon_scale: 1.0,
            step: 0.5,
        }
    }
}

impl RandomEffectsPrior {
    pub fn validate(&self) -> Result<()> {
        NormalPrior::new(self.chi.mean, self.chi.sd)?;
        check_scale("random-effect scale", self.epsilon_scale)?;
        check_scale("random-walk step", self.step)
    }
}

/// `theta_k ~ N(mu, tau²)`, `mu ~ mu`, `tau ~ HN(tau_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmPrior {
    pub mu: NormalPrior,
    pub tau_scale: f64,
    /// Random-walk step on `ln tau`.
    pub step: f64,
}

impl Default for HmPrior {
    fn default() -> Self {
        HmPrior {
            mu: NormalPrior { mean: 0.0, sd: 10.0 },
            tau_scale: 0.125,
            step: 0.5,
        }
    }
}

impl HmPrior {
    pub fn validate(&self) -> Result<()> {
        NormalPrior::new(self.mu.mean, self.mu.sd)?;
        check_scale("between-subtrial scale", self.tau_scale)?;
        check_scale("random-walk step", self.step)
    }
}

/// Each `theta_k` is exchangeable (`ex`) with probability `p_ex`, otherwise
/// it follows its own `nex` prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExnexPrior {
    pub p_ex: f64,
    pub ex: HmPrior,
    pub nex: NormalPrior,
}

impl Default for ExnexPrior {
    fn default() -> Self {
        ExnexPrior {
            p_ex: 0.5,
            ex: HmPrior::default(),
            nex: NormalPrior { mean: 0.0, sd: 10.0 },
        }
    }
}

impl ExnexPrior {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_ex) {
            return invalid_arg(format!("exchangeability probability {} outside [0, 1]", self.p_ex));
        }
        self.ex.validate()?;
        NormalPrior::new(self.nex.mean, self.nex.sd).map(|_| ())
    }
}

fn check_scale(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid_arg(format!("{what} must be positive, got {v}"))
    }
}

/// Seed of the stand-alone fit of subtrial `k` under master seed `seed`.
pub fn standalone_seed(seed: u64, k: usize) -> u64 {
    derive_seed(derive_seed(seed, tag::SUBTRIAL), k as u64)
}

/// One stand-alone fit per subtrial, seeded by subtrial label.
pub fn standalone_fits(
    trial: &BasketTrialData,
    priors: &VaguePriorConfig,
    cfg: &McmcConfig,
) -> Result<Vec<StandaloneFit>> {
    trial
        .subtrials
        .par_iter()
        .map(|s| fit_standalone(s, priors, &cfg.with_seed(standalone_seed(cfg.seed, s.k))))
        .collect()
}

pub fn analyze_no_borrowing(
    trial: &BasketTrialData,
    priors: &VaguePriorConfig,
    cfg: &McmcConfig,
    decision: &DecisionConfig,
) -> Result<Vec<SubtrialAnalysis>> {
    decision.validate()?;
    standalone_fits(trial, priors, cfg)?
        .into_iter()
        .map(|f| SubtrialAnalysis::decide(f.k, f.theta, None, decision))
        .collect()
}

fn joint_analyses(
    trial: &BasketTrialData,
    fit: &JointFit,
    decision: &DecisionConfig,
) -> Result<Vec<SubtrialAnalysis>> {
    trial
        .subtrials
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ex = fit.ex_probability.as_ref().map(|p| p[i]);
            SubtrialAnalysis::decide(s.k, fit.theta[i].clone(), ex, decision)
        })
        .collect()
}

fn joint_seed(cfg: &McmcConfig) -> McmcConfig {
    cfg.with_seed(derive_seed(cfg.seed, tag::JOINT))
}

pub fn analyze_standard_hm(
    trial: &BasketTrialData,
    hm: &HmPrior,
    settings: &JointSettings,
    cfg: &McmcConfig,
    decision: &DecisionConfig,
) -> Result<(Vec<SubtrialAnalysis>, JointFit)> {
    decision.validate()?;
    let model = JointModel {
        settings: settings.clone(),
        theta: ThetaLayer::Exchangeable(*hm),
    };
    let fit = model.fit(trial, &joint_seed(cfg))?;
    Ok((joint_analyses(trial, &fit, decision)?, fit))
}

pub fn analyze_exnex(
    trial: &BasketTrialData,
    prior: &ExnexPrior,
    settings: &JointSettings,
    cfg: &McmcConfig,
    decision: &DecisionConfig,
) -> Result<(Vec<SubtrialAnalysis>, JointFit)> {
    decision.validate()?;
    let model = JointModel {
        settings: settings.clone(),
        theta: ThetaLayer::Exnex(*prior),
    };
    let fit = model.fit(trial, &joint_seed(cfg))?;
    Ok((joint_analyses(trial, &fit, decision)?, fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        assert!(RandomEffectsPrior::default().validate().is_ok());
        assert!(HmPrior::default().validate().is_ok());
        assert!(ExnexPrior::default().validate().is_ok());
        assert!(HmPrior { tau_scale: 0.0, ..HmPrior::default() }.validate().is_err());
        assert!(RandomEffectsPrior { epsilon_scale: -1.0, ..RandomEffectsPrior::default() }
            .validate()
            .is_err());
        assert!(ExnexPrior { p_ex: 1.5, ..ExnexPrior::default() }.validate().is_err());
    }
}
