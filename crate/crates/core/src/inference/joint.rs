//! Joint Gibbs sampler over all subtrials of a basket trial.
//!
//! Per subtrial `k` the coefficients `(gamma_0k, .., gamma_qk, theta_k)` are
//! drawn as one block from their multivariate normal full conditional. The
//! layers above are:
//!
//! * gamma: either independent normals, or random effects
//!   `gamma_jk ~ N(chi_j, eps_j²)` with `chi_j` normal (conjugate update) and
//!   `eps_j` half-normal (log-scale random-walk Metropolis);
//! * theta: fixed normal priors, the exchangeable layer
//!   `theta_k ~ N(mu, tau²)`, or the EXNEX mixture with latent membership
//!   indicators updated given the current `theta_k`;
//! * residual variance: inverse-gamma, shared or per subtrial.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{check_full_rank, design_matrix, sample_gaussian, sample_inverse_gamma};
use super::metropolis::{half_normal_ln_pdf, LogScaleWalk};
use super::{McmcConfig, NormalPrior, PosteriorSummary, ResidualPrior};
use crate::comparators::{ExnexPrior, HmPrior, RandomEffectsPrior};
use crate::error::{invalid_arg, Error, Result};
use crate::rng::{derive_seed, seeded, tag};
use crate::trial::BasketTrialData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GammaLayer {
    Hierarchical(RandomEffectsPrior),
    Independent(NormalPrior),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaLayer {
    /// One fixed normal prior per subtrial, in subtrial order.
    Fixed(Vec<NormalPrior>),
    Exchangeable(HmPrior),
    Exnex(ExnexPrior),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualStructure {
    Shared,
    PerSubtrial,
}

/// Everything about a joint model except the treatment-effect layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSettings {
    pub gamma: GammaLayer,
    pub residual: ResidualStructure,
    pub residual_prior: ResidualPrior,
}

impl Default for JointSettings {
    fn default() -> Self {
        JointSettings {
            gamma: GammaLayer::Hierarchical(RandomEffectsPrior::default()),
            residual: ResidualStructure::Shared,
            residual_prior: ResidualPrior::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub settings: JointSettings,
    pub theta: ThetaLayer,
}

/// Posterior of a joint fit. Vectors over subtrials follow the order of
/// `trial.subtrials`.
#[derive(Debug, Clone)]
pub struct JointFit {
    pub theta: Vec<PosteriorSummary>,
    /// Posterior probability of exchangeability (EXNEX only).
    pub ex_probability: Option<Vec<f64>>,
    pub mu: Option<PosteriorSummary>,
    pub tau: Option<PosteriorSummary>,
    /// Random-effect sds, empty without a gamma hierarchy.
    pub epsilon: Vec<PosteriorSummary>,
    pub sigma: Vec<PosteriorSummary>,
    /// Acceptance rate of the `tau` Metropolis step.
    pub tau_acceptance: Option<f64>,
}

struct Block {
    x: DMatrix<f64>,
    y: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    resid: DVector<f64>,
}

#[derive(Default)]
struct ChainOutput {
    theta: Vec<Vec<f64>>,
    ex_prob: Vec<f64>,
    mu: Vec<f64>,
    tau: Vec<f64>,
    eps: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    tau_accepted: usize,
    tau_proposed: usize,
}

fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    -sd.ln() - 0.5 * ((x - mean) / sd).powi(2)
}

fn sample_var(y: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = y.clone().count() as f64;
    let mean = y.clone().sum::<f64>() / n;
    let var = y.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var > 0.0 {
        var
    } else {
        1.0
    }
}

/// Likelihood of the treatment effect of one block given its other
/// coefficients, as a normal `(mean, variance)`.
fn treatment_evidence(block: &Block, beta: &DVector<f64>, sigma2: f64) -> (f64, f64) {
    let t = beta.len() - 1;
    let n_treated = block.xtx[(t, t)];
    let cross: f64 = (0..t).map(|j| block.xtx[(t, j)] * beta[j]).sum();
    ((block.xty[t] - cross) / n_treated, sigma2 / n_treated)
}

/// Median of a half-normal, used as the starting value.
fn hn_median(scale: f64) -> f64 {
    0.674_489_750_196_081_7 * scale
}

impl JointModel {
    fn validate(&self, trial: &BasketTrialData) -> Result<()> {
        self.settings.residual_prior.validate()?;
        match &self.settings.gamma {
            GammaLayer::Hierarchical(re) => re.validate()?,
            GammaLayer::Independent(p) => {
                NormalPrior::new(p.mean, p.sd)?;
            }
        }
        match &self.theta {
            ThetaLayer::Fixed(priors) => {
                if priors.len() != trial.num_subtrials() {
                    return invalid_arg(format!(
                        "{} treatment-effect priors for {} subtrials",
                        priors.len(),
                        trial.num_subtrials()
                    ));
                }
                for p in priors {
                    NormalPrior::new(p.mean, p.sd)?;
                }
            }
            ThetaLayer::Exchangeable(hm) => hm.validate()?,
            ThetaLayer::Exnex(ex) => ex.validate()?,
        }
        Ok(())
    }

    pub fn fit(&self, trial: &BasketTrialData, cfg: &McmcConfig) -> Result<JointFit> {
        cfg.validate()?;
        self.validate(trial)?;
        let blocks = trial
            .subtrials
            .iter()
            .map(|s| {
                let x = design_matrix(s);
                let xtx = x.tr_mul(&x);
                check_full_rank(&xtx, s.len(), &format!("subtrial {}", s.k))?;
                let y = DVector::from_column_slice(&s.y);
                Ok(Block {
                    xty: x.tr_mul(&y),
                    resid: DVector::zeros(s.len()),
                    x,
                    y,
                    xtx,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let chain_seed = derive_seed(cfg.seed, tag::CHAIN);
        let outputs = (0..cfg.chains)
            .into_par_iter()
            .map(|c| {
                let mut blocks: Vec<Block> = blocks
                    .iter()
                    .map(|b| Block {
                        x: b.x.clone(),
                        y: b.y.clone(),
                        xtx: b.xtx.clone(),
                        xty: b.xty.clone(),
                        resid: b.resid.clone(),
                    })
                    .collect();
                self.run_chain(&mut blocks, cfg, derive_seed(chain_seed, c as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.assemble(outputs, trial.num_subtrials(), cfg))
    }

    fn assemble(&self, outputs: Vec<ChainOutput>, k: usize, cfg: &McmcConfig) -> JointFit {
        let level = cfg.credible_level;
        let gather = |f: &dyn Fn(&ChainOutput) -> &Vec<f64>| {
            PosteriorSummary::from_chains(outputs.iter().map(|o| f(o).clone()).collect(), level)
        };
        let theta = (0..k).map(|i| gather(&|o| &o.theta[i])).collect();
        let n_eps = outputs[0].eps.len();
        let epsilon = (0..n_eps).map(|j| gather(&|o| &o.eps[j])).collect();
        let sigma = (0..outputs[0].sigma.len()).map(|r| gather(&|o| &o.sigma[r])).collect();
        let has_tau = !matches!(self.theta, ThetaLayer::Fixed(_));
        let draws = (cfg.chains * cfg.draws_per_chain()) as f64;
        let ex_probability = matches!(self.theta, ThetaLayer::Exnex(_)).then(|| {
            (0..k)
                .map(|i| outputs.iter().map(|o| o.ex_prob[i]).sum::<f64>() / draws)
                .collect()
        });
        let (accepted, proposed) = outputs
            .iter()
            .fold((0, 0), |(a, p), o| (a + o.tau_accepted, p + o.tau_proposed));
        JointFit {
            theta,
            ex_probability,
            mu: has_tau.then(|| gather(&|o| &o.mu)),
            tau: has_tau.then(|| gather(&|o| &o.tau)),
            epsilon,
            sigma,
            tau_acceptance: (has_tau && proposed > 0).then(|| accepted as f64 / proposed as f64),
        }
    }

    fn run_chain(&self, blocks: &mut [Block], cfg: &McmcConfig, seed: u64) -> Result<ChainOutput> {
        let mut rng = seeded(seed);
        let k = blocks.len();
        let p = blocks[0].x.ncols();
        let n_gamma = p - 1;
        let keep = cfg.draws_per_chain();

        let shared = self.settings.residual == ResidualStructure::Shared;
        let mut sigma2: Vec<f64> = if shared {
            vec![sample_var(blocks.iter().flat_map(|b| b.y.iter().copied()))]
        } else {
            blocks.iter().map(|b| sample_var(b.y.iter().copied())).collect()
        };
        if let ResidualPrior::Known { variance } = self.settings.residual_prior {
            sigma2.iter_mut().for_each(|s| *s = variance);
        }

        let mut beta: Vec<DVector<f64>> = vec![DVector::zeros(p); k];
        let (mut chi, mut eps) = match &self.settings.gamma {
            GammaLayer::Hierarchical(re) => (vec![re.chi.mean; n_gamma], vec![hn_median(re.epsilon_scale); n_gamma]),
            GammaLayer::Independent(_) => (Vec::new(), Vec::new()),
        };
        let hm = match &self.theta {
            ThetaLayer::Fixed(_) => None,
            ThetaLayer::Exchangeable(hm) => Some(*hm),
            ThetaLayer::Exnex(ex) => Some(ex.ex),
        };
        let mut mu = hm.map_or(0.0, |h| h.mu.mean);
        let mut tau = hm.map_or(1.0, |h| hn_median(h.tau_scale));
        let mut ex: Vec<bool> = match &self.theta {
            ThetaLayer::Exnex(e) => vec![e.p_ex > 0.0; k],
            _ => vec![true; k],
        };

        let mut out = ChainOutput {
            theta: vec![Vec::with_capacity(keep); k],
            ex_prob: vec![0.0; k],
            eps: vec![Vec::with_capacity(keep); eps.len()],
            sigma: vec![Vec::with_capacity(keep); sigma2.len()],
            ..ChainOutput::default()
        };
        let mut work = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        let mut prior_mean = vec![0.0; p];
        let mut prior_prec = vec![0.0; p];
        let mut ex_prob_now = vec![1.0; k];

        for it in 0..cfg.total_iterations() {
            // coefficient blocks
            for (i, block) in blocks.iter().enumerate() {
                let s2 = sigma2[if shared { 0 } else { i }];
                for j in 0..n_gamma {
                    let (m, prec) = match &self.settings.gamma {
                        GammaLayer::Hierarchical(_) => (chi[j], 1.0 / (eps[j] * eps[j])),
                        GammaLayer::Independent(pr) => (pr.mean, pr.precision()),
                    };
                    prior_mean[j] = m;
                    prior_prec[j] = prec;
                }
                let (m, sd) = match &self.theta {
                    ThetaLayer::Fixed(priors) => (priors[i].mean, priors[i].sd),
                    ThetaLayer::Exchangeable(_) => (mu, tau),
                    ThetaLayer::Exnex(e) => {
                        if ex[i] {
                            (mu, tau)
                        } else {
                            (e.nex.mean, e.nex.sd)
                        }
                    }
                };
                prior_mean[p - 1] = m;
                prior_prec[p - 1] = 1.0 / (sd * sd);

                work.copy_from(&block.xtx);
                work /= s2;
                for j in 0..p {
                    work[(j, j)] += prior_prec[j];
                    b[j] = block.xty[j] / s2 + prior_prec[j] * prior_mean[j];
                }
                work = sample_gaussian(work, &mut b, &mut beta[i], &mut rng).map_err(|e| match e {
                    Error::SingularDesign(m) => Error::SingularDesign(format!("subtrial {}: {m}", i + 1)),
                    other => other,
                })?;
            }

            // random effects on the regression coefficients
            if let GammaLayer::Hierarchical(re) = &self.settings.gamma {
                let walk = LogScaleWalk { step: re.step };
                for j in 0..n_gamma {
                    let e2 = eps[j] * eps[j];
                    let prec = re.chi.precision() + k as f64 / e2;
                    let sum: f64 = beta.iter().map(|bk| bk[j]).sum();
                    let mean = (re.chi.precision() * re.chi.mean + sum / e2) / prec;
                    chi[j] = mean + rng.sample::<f64, _>(rand_distr::StandardNormal) / prec.sqrt();

                    let ss: f64 = beta.iter().map(|bk| (bk[j] - chi[j]).powi(2)).sum();
                    let target = |e: f64| half_normal_ln_pdf(e, re.epsilon_scale) - k as f64 * e.ln() - ss / (2.0 * e * e);
                    eps[j] = walk.update(eps[j], target, &mut rng).0;
                }
            }

            // treatment-effect layer
            if let Some(h) = hm {
                if let ThetaLayer::Exnex(e) = &self.theta {
                    for i in 0..k {
                        let th = beta[i][p - 1];
                        let ln_ex = e.p_ex.ln() + ln_normal(th, mu, tau);
                        let ln_nex = (1.0 - e.p_ex).ln() + ln_normal(th, e.nex.mean, e.nex.sd);
                        let prob = if e.p_ex <= 0.0 {
                            0.0
                        } else if e.p_ex >= 1.0 {
                            1.0
                        } else {
                            1.0 / (1.0 + (ln_nex - ln_ex).exp())
                        };
                        ex_prob_now[i] = prob;
                        ex[i] = rng.random::<f64>() < prob;
                    }
                }
                // (mu, theta) as one block: mu with every theta_k integrated
                // out, then each theta_k from its conditional. Without this
                // the chain cannot move when tau is small.
                let t2 = tau * tau;
                let evidence: Vec<(f64, f64)> = (0..k)
                    .map(|i| treatment_evidence(&blocks[i], &beta[i], sigma2[if shared { 0 } else { i }]))
                    .collect();
                let mut prec = h.mu.precision();
                let mut weighted = prec * h.mu.mean;
                for i in (0..k).filter(|&i| ex[i]) {
                    let (m, v) = evidence[i];
                    prec += 1.0 / (v + t2);
                    weighted += m / (v + t2);
                }
                mu = weighted / prec + rng.sample::<f64, _>(rand_distr::StandardNormal) / prec.sqrt();
                for i in 0..k {
                    let (m0, sd0) = match &self.theta {
                        ThetaLayer::Exnex(e) if !ex[i] => (e.nex.mean, e.nex.sd),
                        _ => (mu, tau),
                    };
                    let (m, v) = evidence[i];
                    let prec = 1.0 / v + 1.0 / (sd0 * sd0);
                    let mean = (m / v + m0 / (sd0 * sd0)) / prec;
                    beta[i][p - 1] = mean + rng.sample::<f64, _>(rand_distr::StandardNormal) / prec.sqrt();
                }
                let members: Vec<f64> = (0..k).filter(|&i| ex[i]).map(|i| beta[i][p - 1]).collect();

                let ss: f64 = members.iter().map(|t| (t - mu).powi(2)).sum();
                let n_members = members.len() as f64;
                let target = |t: f64| half_normal_ln_pdf(t, h.tau_scale) - n_members * t.ln() - ss / (2.0 * t * t);
                let (next, accepted) = LogScaleWalk { step: h.step }.update(tau, target, &mut rng);
                tau = next;
                out.tau_proposed += 1;
                out.tau_accepted += usize::from(accepted);
            }

            // residual variance
            if let ResidualPrior::InverseGamma { shape, rate } = self.settings.residual_prior {
                for (i, block) in blocks.iter_mut().enumerate() {
                    block.resid.copy_from(&block.y);
                    block.resid.gemv(-1.0, &block.x, &beta[i], 1.0);
                }
                if shared {
                    let ssr: f64 = blocks.iter().map(|b| b.resid.norm_squared()).sum();
                    let n: usize = blocks.iter().map(|b| b.y.len()).sum();
                    sigma2[0] = sample_inverse_gamma(shape + 0.5 * n as f64, rate + 0.5 * ssr, &mut rng);
                } else {
                    for (i, block) in blocks.iter().enumerate() {
                        let n = block.y.len() as f64;
                        sigma2[i] = sample_inverse_gamma(shape + 0.5 * n, rate + 0.5 * block.resid.norm_squared(), &mut rng);
                    }
                }
            }

            if cfg.keep(it) {
                for i in 0..k {
                    out.theta[i].push(beta[i][p - 1]);
                    out.ex_prob[i] += ex_prob_now[i];
                }
                for (j, e) in eps.iter().enumerate() {
                    out.eps[j].push(*e);
                }
                for (r, s2) in sigma2.iter().enumerate() {
                    out.sigma[r].push(s2.sqrt());
                }
                out.mu.push(mu);
                out.tau.push(tau);
            }
        }
        Ok(out)
    }
}
