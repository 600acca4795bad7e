//! End-to-end borrowing analysis: stand-alone fits, pairwise Hellinger
//! distances, marginal predictive priors and a final joint fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::predictive::DEFAULT_CPP_DRAWS;
use super::{
    combine_mpp, marginal_cpp_moments, slab_weight, softmax_weights, HellingerMatrix, MppPrior, SpikeSlabPrior,
    WeightMatrix, DEFAULT_SLAB_LOWER, DEFAULT_SLAB_UPPER, DEFAULT_SPIKE,
};
use crate::comparators::standalone_fits;
use crate::error::{invalid_arg, Result};
use crate::inference::{
    DecisionConfig, JointFit, JointModel, JointSettings, McmcConfig, PosteriorSummary, StandaloneFit, ThetaLayer,
    VaguePriorConfig,
};
use crate::model::SubtrialAnalysis;
use crate::rng::{derive_seed, seeded, tag};
use crate::trial::BasketTrialData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposedConfig {
    /// Softmax scale of the weight allocation.
    pub s0: f64,
    pub slab_lower: f64,
    pub slab_upper: f64,
    pub spike: f64,
    /// Monte Carlo size per marginal predictive prior.
    pub cpp_draws: usize,
}

impl Default for ProposedConfig {
    fn default() -> Self {
        ProposedConfig {
            s0: 0.15,
            slab_lower: DEFAULT_SLAB_LOWER,
            slab_upper: DEFAULT_SLAB_UPPER,
            spike: DEFAULT_SPIKE,
            cpp_draws: DEFAULT_CPP_DRAWS,
        }
    }
}

impl ProposedConfig {
    pub fn prior(&self, slab_weight: f64) -> Result<SpikeSlabPrior> {
        SpikeSlabPrior::new(self.slab_lower, self.slab_upper, self.spike, slab_weight)
    }
}

/// One marginal predictive prior per target subtrial (in order of
/// `stage1`), borrowing from every other subtrial. `distances` may be the
/// Hellinger matrix of `stage1` or any other valid distance matrix.
/// Subtrial labels in the priors are 1-based positions.
pub fn build_mpp_priors(
    stage1: &[PosteriorSummary],
    distances: &HellingerMatrix,
    cfg: &ProposedConfig,
    seed: u64,
) -> Result<Vec<MppPrior>> {
    let k = stage1.len();
    if k < 2 {
        return invalid_arg("borrowing needs at least two subtrials");
    }
    if distances.len() != k {
        return invalid_arg(format!("{}x{} distance matrix for {k} subtrials", distances.len(), distances.len()));
    }
    cfg.prior(0.0)?;
    let cpp_seed = derive_seed(seed, tag::CPP);
    (0..k)
        .into_par_iter()
        .map(|target| {
            let sources: Vec<usize> = (0..k).filter(|&s| s != target).collect();
            let d: Vec<f64> = sources.iter().map(|&s| distances.get(s, target)).collect();
            let components = sources
                .iter()
                .zip(&d)
                .map(|(&s, &dist)| {
                    let prior = cfg.prior(slab_weight(dist)?)?;
                    let mut rng = seeded(derive_seed(cpp_seed, (target * k + s) as u64));
                    marginal_cpp_moments(&stage1[s], &prior, cfg.cpp_draws, &mut rng, s + 1)
                })
                .collect::<Result<Vec<_>>>()?;
            combine_mpp(&components, &softmax_weights(&d, cfg.s0)?)
        })
        .collect()
}

/// Joint fit in which `theta_k` has the normal prior `priors[k]`.
pub fn fit_with_mpp(
    trial: &BasketTrialData,
    priors: &[MppPrior],
    settings: &JointSettings,
    cfg: &McmcConfig,
) -> Result<JointFit> {
    if priors.len() != trial.num_subtrials() {
        return invalid_arg(format!("{} priors for {} subtrials", priors.len(), trial.num_subtrials()));
    }
    JointModel {
        settings: settings.clone(),
        theta: ThetaLayer::Fixed(priors.iter().map(MppPrior::as_normal).collect()),
    }
    .fit(trial, cfg)
}

/// Everything produced by [`analyze_proposed`].
#[derive(Debug, Clone)]
pub struct ProposedAnalysis {
    pub subtrials: Vec<SubtrialAnalysis>,
    pub stage1: Vec<StandaloneFit>,
    pub hellinger: HellingerMatrix,
    pub priors: Vec<MppPrior>,
    pub weights: WeightMatrix,
    pub fit: JointFit,
}

pub fn analyze_proposed(
    trial: &BasketTrialData,
    proposed: &ProposedConfig,
    vague: &VaguePriorConfig,
    settings: &JointSettings,
    cfg: &McmcConfig,
    decision: &DecisionConfig,
) -> Result<ProposedAnalysis> {
    decision.validate()?;
    if trial.num_subtrials() < 2 {
        return invalid_arg("borrowing needs at least two subtrials");
    }
    let stage1 = standalone_fits(trial, vague, cfg)?;
    let thetas: Vec<PosteriorSummary> = stage1.iter().map(|f| f.theta.clone()).collect();
    let hellinger = HellingerMatrix::from_summaries(&thetas)?;
    let priors = build_mpp_priors(&thetas, &hellinger, proposed, cfg.seed)?;
    let fit = fit_with_mpp(trial, &priors, settings, &cfg.with_seed(derive_seed(cfg.seed, tag::JOINT)))?;
    let subtrials = trial
        .subtrials
        .iter()
        .zip(&fit.theta)
        .map(|(s, th)| SubtrialAnalysis::decide(s.k, th.clone(), None, decision))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProposedAnalysis {
        subtrials,
        weights: WeightMatrix::from_priors(&priors),
        stage1,
        hellinger,
        priors,
        fit,
    })
}
