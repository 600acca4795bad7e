use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use super::{McmcConfig, PosteriorSummary, ResidualPrior, VaguePriorConfig};
use crate::error::{invalid_arg, Error, Result};
use crate::rng::{derive_seed, seeded, tag};
use crate::trial::SubtrialData;

/// Relative eigenvalue floor below which `X'X` counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

pub(crate) fn design_matrix(data: &SubtrialData) -> DMatrix<f64> {
    let p = data.num_coefficients();
    DMatrix::from_fn(data.len(), p, |i, j| data.design_row(i).nth(j).unwrap())
}

pub(crate) fn check_full_rank(xtx: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    let p = xtx.nrows();
    if n < p {
        return Err(Error::SingularDesign(format!(
            "{what}: {n} observations for {p} coefficients"
        )));
    }
    let eig = SymmetricEigen::new(xtx.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > RANK_TOLERANCE * max) {
        return Err(Error::SingularDesign(format!(
            "{what}: design matrix does not have full column rank"
        )));
    }
    Ok(())
}

/// Draw from `N(Q⁻¹b, Q⁻¹)`. `precision` is consumed as the factorisation
/// workspace and handed back for reuse; `b` is overwritten with the mean.
pub(crate) fn sample_gaussian<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    b: &mut DVector<f64>,
    out: &mut DVector<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(precision)
        .ok_or_else(|| Error::SingularDesign("full-conditional precision is not positive definite".into()))?;
    chol.solve_mut(b);
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    chol.l_dirty().tr_solve_lower_triangular_mut(out);
    *out += &*b;
    Ok(chol.unpack_dirty())
}

/// `1 / Gamma(shape, rate)`.
pub(crate) fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate)
        .expect("inverse-gamma parameters are positive")
        .sample(rng);
    1.0 / g
}

/// Normal linear regression with independent normal priors on the
/// coefficients, sampled by two-block Gibbs: coefficients jointly from their
/// multivariate normal full conditional, then the residual variance.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    x: DMatrix<f64>,
    y: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    prior_mean: DVector<f64>,
    prior_precision: DVector<f64>,
    residual: ResidualPrior,
}

/// Raw draws of a [`LinearRegression`], indexed `[parameter][chain][draw]`
/// for the coefficients and `[chain][draw]` for the residual sd.
#[derive(Debug, Clone)]
pub struct LinearDraws {
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub sigma: Vec<Vec<f64>>,
}

impl LinearRegression {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        prior_mean: Vec<f64>,
        prior_sd: Vec<f64>,
        residual: ResidualPrior,
    ) -> Result<Self> {
        let p = x.ncols();
        if x.nrows() != y.len() || prior_mean.len() != p || prior_sd.len() != p {
            return invalid_arg("design, response and prior dimensions disagree");
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite values in regression data".into()));
        }
        if prior_sd.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return invalid_arg("prior sds must be positive and finite");
        }
        residual.validate()?;
        let xtx = x.tr_mul(&x);
        check_full_rank(&xtx, x.nrows(), "regression")?;
        let xty = x.tr_mul(&y);
        Ok(LinearRegression {
            x,
            y,
            xtx,
            xty,
            prior_mean: DVector::from_vec(prior_mean),
            prior_precision: DVector::from_iterator(p, prior_sd.iter().map(|s| 1.0 / (s * s))),
            residual,
        })
    }

    fn initial_variance(&self) -> f64 {
        match self.residual {
            ResidualPrior::Known { variance } => variance,
            ResidualPrior::InverseGamma { .. } => {
                let n = self.y.len() as f64;
                let mean = self.y.mean();
                let var = self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                if var > 0.0 {
                    var
                } else {
                    1.0
                }
            }
        }
    }

    fn run_chain(&self, cfg: &McmcConfig, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut rng = seeded(seed);
        let p = self.x.ncols();
        let n = self.y.len() as f64;
        let keep = cfg.draws_per_chain();
        let mut coef_draws = vec![Vec::with_capacity(keep); p];
        let mut sigma_draws = Vec::with_capacity(keep);

        let mut sigma2 = self.initial_variance();
        let mut work = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        let mut beta = DVector::zeros(p);
        let mut resid = DVector::zeros(self.y.len());

        for it in 0..cfg.total_iterations() {
            work.copy_from(&self.xtx);
            work /= sigma2;
            for j in 0..p {
                work[(j, j)] += self.prior_precision[j];
                b[j] = self.xty[j] / sigma2 + self.prior_precision[j] * self.prior_mean[j];
            }
            work = sample_gaussian(work, &mut b, &mut beta, &mut rng)?;

            if let ResidualPrior::InverseGamma { shape, rate } = self.residual {
                resid.copy_from(&self.y);
                resid.gemv(-1.0, &self.x, &beta, 1.0);
                sigma2 = sample_inverse_gamma(shape + 0.5 * n, rate + 0.5 * resid.norm_squared(), &mut rng);
            }

            if cfg.keep(it) {
                for j in 0..p {
                    coef_draws[j].push(beta[j]);
                }
                sigma_draws.push(sigma2.sqrt());
            }
        }
        Ok((coef_draws, sigma_draws))
    }

    /// Run `cfg.chains` chains, each seeded from `hash(cfg.seed, chain)`.
    pub fn sample(&self, cfg: &McmcConfig) -> Result<LinearDraws> {
        cfg.validate()?;
        let chain_seed = derive_seed(cfg.seed, tag::CHAIN);
        let chains = (0..cfg.chains)
            .into_par_iter()
            .map(|c| self.run_chain(cfg, derive_seed(chain_seed, c as u64)))
            .collect::<Result<Vec<_>>>()?;
        let p = self.x.ncols();
        let mut coefficients = vec![Vec::with_capacity(cfg.chains); p];
        let mut sigma = Vec::with_capacity(cfg.chains);
        for (coef, sig) in chains {
            for (j, draws) in coef.into_iter().enumerate() {
                coefficients[j].push(draws);
            }
            sigma.push(sig);
        }
        Ok(LinearDraws {
            coefficients,
            sigma,
        })
    }
}

/// Stand-alone posterior of one subtrial.
#[derive(Debug, Clone)]
pub struct StandaloneFit {
    pub k: usize,
    pub theta: PosteriorSummary,
    /// Intercept followed by the covariate effects.
    pub gamma: Vec<PosteriorSummary>,
    pub sigma: PosteriorSummary,
}

impl StandaloneFit {
    fn parameters(&self) -> Vec<(String, &PosteriorSummary)> {
        let mut out: Vec<(String, &PosteriorSummary)> = self
            .gamma
            .iter()
            .enumerate()
            .map(|(j, s)| (format!("gamma{j}"), s))
            .collect();
        out.push(("theta".into(), &self.theta));
        out.push(("sigma".into(), &self.sigma));
        out
    }

    /// Per-parameter split-R̂ and effective sample size.
    pub fn diagnostics(&self) -> Result<Vec<(String, super::ChainDiagnostics)>> {
        self.parameters()
            .into_iter()
            .map(|(name, s)| Ok((name, super::diagnostics(&s.chain_slices())?)))
            .collect()
    }

    /// Draws as CSV with one column per parameter.
    pub fn write_draws_csv<W: Write>(&self, writer: W) -> Result<()> {
        let params = self.parameters();
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "draw".to_string()];
        header.extend(params.iter().map(|(n, _)| n.clone()));
        wtr.write_record(&header)?;
        let per_chain = self.theta.draws.len() / self.theta.chains.max(1);
        for c in 0..self.theta.chains {
            for i in 0..per_chain {
                let mut row = vec![c.to_string(), i.to_string()];
                row.extend(params.iter().map(|(_, s)| s.draws[c * per_chain + i].to_string()));
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fit subtrial `data` on its own: `theta ~ priors.theta`, every
/// intercept/covariate coefficient `~ priors.gamma`, residual variance per
/// `priors.residual`.
pub fn fit_standalone(
    data: &SubtrialData,
    priors: &VaguePriorConfig,
    cfg: &McmcConfig,
) -> Result<StandaloneFit> {
    data.validate()?;
    let p = data.num_coefficients();
    let x = design_matrix(data);
    let y = DVector::from_column_slice(&data.y);
    let mut prior_mean = vec![priors.gamma.mean; p];
    let mut prior_sd = vec![priors.gamma.sd; p];
    prior_mean[p - 1] = priors.theta.mean;
    prior_sd[p - 1] = priors.theta.sd;
    let model = LinearRegression::new(x, y, prior_mean, prior_sd, priors.residual).map_err(|e| match e {
        Error::SingularDesign(m) => Error::SingularDesign(format!("subtrial {}: {m}", data.k)),
        other => other,
    })?;
    let draws = model.sample(cfg)?;
    let level = cfg.credible_level;
    let mut summaries: Vec<PosteriorSummary> = draws
        .coefficients
        .into_iter()
        .map(|c| PosteriorSummary::from_chains(c, level))
        .collect();
    let theta = summaries.pop().expect("treatment coefficient");
    Ok(StandaloneFit {
        k: data.k,
        theta,
        gamma: summaries,
        sigma: PosteriorSummary::from_chains(draws.sigma, level),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::NormalPrior;
    use crate::rng::seeded;
    use crate::trial::{generate_subtrial, Scenario};

    fn quick() -> McmcConfig {
        McmcConfig {
            iterations: 2_000,
            burn_in: 200,
            ..McmcConfig::default()
        }
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        // every patient treated: the treatment column equals the intercept
        let data = SubtrialData::new(
            1,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 3.5], vec![4.0, 1.0], vec![5.0, 0.5], vec![6.0, 9.0]],
            vec![1; 6],
        )
        .unwrap();
        let err = fit_standalone(&data, &VaguePriorConfig::default(), &quick());
        assert!(matches!(err, Err(Error::SingularDesign(_))), "{err:?}");

        let tiny = SubtrialData::new(1, vec![1.0, 2.0], vec![vec![1.0], vec![2.0]], vec![0, 1]).unwrap();
        assert!(matches!(
            fit_standalone(&tiny, &VaguePriorConfig::default(), &quick()),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn draw_counts_follow_config() {
        let data = generate_subtrial(&Scenario::preset("S5").unwrap(), 5, &mut seeded(2)).unwrap();
        let cfg = McmcConfig {
            chains: 3,
            iterations: 300,
            burn_in: 10,
            thinning: 4,
            ..McmcConfig::default()
        };
        let fit = fit_standalone(&data, &VaguePriorConfig::default(), &cfg).unwrap();
        assert_eq!(fit.theta.draws.len(), 3 * 75);
        assert_eq!(fit.gamma.len(), 3);
        assert!(fit.sigma.draws.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let data = generate_subtrial(&Scenario::preset("S1").unwrap(), 2, &mut seeded(5)).unwrap();
        let a = fit_standalone(&data, &VaguePriorConfig::default(), &quick().with_seed(3)).unwrap();
        let b = fit_standalone(&data, &VaguePriorConfig::default(), &quick().with_seed(3)).unwrap();
        let c = fit_standalone(&data, &VaguePriorConfig::default(), &quick().with_seed(4)).unwrap();
        assert_eq!(a.theta.draws, b.theta.draws);
        assert_ne!(a.theta.draws, c.theta.draws);
    }

    #[test]
    fn draws_csv_has_one_column_per_parameter() {
        let data = generate_subtrial(&Scenario::preset("S1").unwrap(), 2, &mut seeded(5)).unwrap();
        let cfg = McmcConfig {
            iterations: 5,
            burn_in: 0,
            ..McmcConfig::default()
        };
        let fit = fit_standalone(&data, &VaguePriorConfig::default(), &cfg).unwrap();
        let mut buf = Vec::new();
        fit.write_draws_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "chain,draw,gamma0,gamma1,gamma2,theta,sigma");
        assert_eq!(lines.count(), 10);
    }

    #[test]
    fn known_variance_is_not_sampled() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let model = LinearRegression::new(x, y, vec![0.0], vec![10.0], ResidualPrior::Known { variance: 2.0 }).unwrap();
        let draws = model.sample(&quick()).unwrap();
        assert!(draws.sigma.iter().flatten().all(|&s| s == 2f64.sqrt()));
    }

    #[test]
    fn bad_priors_rejected() {
        let data = generate_subtrial(&Scenario::preset("S1").unwrap(), 2, &mut seeded(5)).unwrap();
        let priors = VaguePriorConfig {
            theta: NormalPrior { mean: 0.0, sd: 0.0 },
            ..VaguePriorConfig::default()
        };
        assert!(matches!(fit_standalone(&data, &priors, &quick()), Err(Error::InvalidArgument(_))));
    }
}
