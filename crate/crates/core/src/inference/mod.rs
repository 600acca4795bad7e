//! Bayesian linear-model fitting by Gibbs sampling.
//!
//! [`fit_standalone`] analyses one subtrial on its own under vague priors.
//! [`JointModel`] fits all subtrials at once with a shared residual scale,
//! optional random effects on the regression coefficients and a
//! configurable prior layer for the treatment effects; the comparator
//! models and the borrowing-informed fit are all instances of it.

mod diagnostics;
mod joint;
mod linear;
mod metropolis;
mod summary;

pub use diagnostics::{diagnostics, ChainDiagnostics, R_HAT_THRESHOLD};
pub use joint::{GammaLayer, JointFit, JointModel, JointSettings, ResidualStructure, ThetaLayer};
pub use linear::{fit_standalone, LinearDraws, LinearRegression, StandaloneFit};
pub use metropolis::{half_normal_ln_pdf, LogScaleWalk};
pub use summary::{posterior_prob_exceeds, quantile, PosteriorSummary};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};

/// A univariate normal prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() {
            return invalid_arg(format!("normal prior needs finite mean and sd > 0, got ({mean}, {sd})"));
        }
        Ok(NormalPrior { mean, sd })
    }

    pub fn precision(&self) -> f64 {
        1.0 / (self.sd * self.sd)
    }
}

/// Prior on the residual variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ResidualPrior {
    /// `sigma² ~ InvGamma(shape, rate)`.
    InverseGamma { shape: f64, rate: f64 },
    /// The residual variance is fixed and not sampled.
    Known { variance: f64 },
}

impl Default for ResidualPrior {
    fn default() -> Self {
        ResidualPrior::InverseGamma {
            shape: 0.01,
            rate: 0.01,
        }
    }
}

impl ResidualPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ResidualPrior::InverseGamma { shape, rate } if shape > 0.0 && rate > 0.0 => Ok(()),
            ResidualPrior::Known { variance } if variance > 0.0 && variance.is_finite() => Ok(()),
            other => invalid_arg(format!("invalid residual prior {other:?}")),
        }
    }
}

/// Vague priors of a stand-alone analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaguePriorConfig {
    pub theta: NormalPrior,
    /// Applied independently to the intercept and every covariate effect.
    pub gamma: NormalPrior,
    pub residual: ResidualPrior,
}

impl Default for VaguePriorConfig {
    fn default() -> Self {
        VaguePriorConfig {
            theta: NormalPrior { mean: 0.0, sd: 10.0 },
            gamma: NormalPrior { mean: 0.0, sd: 5.0 },
            residual: ResidualPrior::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    /// Post-burn-in iterations per chain.
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thinning`-th post-burn-in iteration.
    pub thinning: usize,
    pub seed: u64,
    /// Central credible-interval level reported by the summaries.
    pub credible_level: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 2,
            iterations: 10_000,
            burn_in: 3_000,
            thinning: 1,
            seed: 0,
            credible_level: 0.95,
        }
    }
}

impl McmcConfig {
    /// Reduced budget used for simulation studies: 2 chains of 4,000 draws
    /// after 1,000 burn-in.
    pub fn desk_scale() -> Self {
        McmcConfig {
            iterations: 4_000,
            burn_in: 1_000,
            ..McmcConfig::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        McmcConfig { seed, ..self }
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iterations / self.thinning
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iterations == 0 || self.thinning == 0 {
            return invalid_arg("chains, iterations and thinning must all be at least 1");
        }
        if self.draws_per_chain() == 0 {
            return invalid_arg("thinning leaves no draws");
        }
        if !(self.credible_level > 0.0 && self.credible_level < 1.0) {
            return invalid_arg(format!("credible level {} outside (0, 1)", self.credible_level));
        }
        Ok(())
    }

    pub(crate) fn keep(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in + 1).is_multiple_of(self.thinning)
    }

    pub(crate) fn total_iterations(&self) -> usize {
        self.burn_in + self.iterations
    }
}

/// Go/No-go rule: Go for subtrial k iff `P(theta_k > delta_u) > zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub delta_u: f64,
    pub zeta: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            delta_u: 0.25,
            zeta: 0.975,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zeta) || !self.delta_u.is_finite() {
            return invalid_arg(format!("invalid decision rule {self:?}"));
        }
        Ok(())
    }

    pub fn is_go(&self, prob_exceeds: f64) -> bool {
        prob_exceeds > self.zeta
    }
}
