mod common;

use basket_core::inference::{
    diagnostics, fit_standalone, LinearRegression, McmcConfig, NormalPrior, PosteriorSummary, ResidualPrior,
    VaguePriorConfig,
};
use basket_core::rng::seeded;
use basket_core::trial::{generate_subtrial, Scenario, SubtrialData};
use common::{cfg, mc_se};
use nalgebra::{DMatrix, DVector};

fn scenario_subtrial(n: usize, theta: f64, seed: u64) -> SubtrialData {
    let mut s = Scenario::with_theta("oracle", vec![theta]);
    s.n = vec![n];
    generate_subtrial(&s, 1, &mut seeded(seed)).unwrap()
}

fn design(data: &SubtrialData) -> DMatrix<f64> {
    DMatrix::from_fn(data.len(), data.num_coefficients(), |i, j| data.design_row(i).nth(j).unwrap())
}

fn summaries(draws: Vec<Vec<Vec<f64>>>, level: f64) -> Vec<PosteriorSummary> {
    draws.into_iter().map(|c| PosteriorSummary::from_chains(c, level)).collect()
}

#[test]
fn known_variance_normal_mean_matches_conjugate_posterior() {
    // 25 observations with mean exactly 2
    let y: Vec<f64> = (0..25).map(|i| 2.0 + (i as f64 - 12.0) * 0.1).collect();
    let model = LinearRegression::new(
        DMatrix::from_element(25, 1, 1.0),
        DVector::from_vec(y),
        vec![0.0],
        vec![10.0],
        ResidualPrior::Known { variance: 1.0 },
    )
    .unwrap();
    let c = cfg(10_000, 500, 11);
    let s = summaries(model.sample(&c).unwrap().coefficients, 0.95).remove(0);

    let precision: f64 = 25.0 + 1.0 / 100.0;
    let exact_mean = 25.0 * 2.0 / precision;
    let exact_sd = precision.sqrt().recip();
    assert!((exact_mean - 1.9992).abs() < 1e-4 && (exact_sd - 0.19996).abs() < 1e-5);

    let se_mean = mc_se(&s);
    // sd of a sample sd from ~20k near-iid normal draws
    let se_sd = exact_sd / (2.0 * s.draws.len() as f64).sqrt();
    assert!((s.mean - exact_mean).abs() < 3.0 * se_mean, "{} vs {exact_mean} (se {se_mean})", s.mean);
    assert!((s.sd - exact_sd).abs() < 3.0 * se_sd, "{} vs {exact_sd}", s.sd);

    let d = diagnostics(&s.chain_slices()).unwrap();
    assert!(d.r_hat < 1.05 && !d.flagged, "{d:?}");
}

#[test]
fn flat_prior_limit_matches_least_squares() {
    let data = scenario_subtrial(40, 0.45, 5);
    let x = design(&data);
    let y = DVector::from_column_slice(&data.y);
    let ols = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();

    let p = data.num_coefficients();
    let model = LinearRegression::new(x, y, vec![0.0; p], vec![1e6; p], ResidualPrior::default()).unwrap();
    let s = summaries(model.sample(&cfg(10_000, 1_000, 3)).unwrap().coefficients, 0.95);
    for (j, sj) in s.iter().enumerate() {
        let se = mc_se(sj);
        assert!((sj.mean - ols[j]).abs() < 4.0 * se, "coef {j}: {} vs {} (se {se})", sj.mean, ols[j]);
    }
}

#[test]
fn treatment_posterior_sd_matches_student_t() {
    let data = scenario_subtrial(30, 0.45, 8);
    let x = design(&data);
    let y = DVector::from_column_slice(&data.y);
    let p = data.num_coefficients();
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let beta = &xtx_inv * x.transpose() * &y;
    let ssr = (&y - &x * &beta).norm_squared();
    // flat coefficients, IG(a, b) variance: t with 2a + n - p df
    let (a, b) = (0.01, 0.01);
    let df = 2.0 * a + (data.len() - p) as f64;
    let scale2 = (ssr + 2.0 * b) / df * xtx_inv[(p - 1, p - 1)];
    let t_sd = (scale2 * df / (df - 2.0)).sqrt();

    let model = LinearRegression::new(x, y, vec![0.0; p], vec![1e6; p], ResidualPrior::default()).unwrap();
    let s = summaries(model.sample(&cfg(20_000, 1_000, 4)).unwrap().coefficients, 0.95).remove(p - 1);
    assert!((s.sd / t_sd - 1.0).abs() < 0.03, "{} vs {t_sd}", s.sd);
    assert!((s.mean - beta[p - 1]).abs() < 4.0 * mc_se(&s));
}

#[test]
fn large_sample_recovers_generating_effect() {
    let data = scenario_subtrial(10_000, 0.45, 21);
    let fit = fit_standalone(&data, &VaguePriorConfig::default(), &cfg(1_000, 200, 2)).unwrap();
    assert!((fit.theta.mean - 0.45).abs() < 3.0 * fit.theta.sd, "{} ± {}", fit.theta.mean, fit.theta.sd);
    assert!((fit.sigma.mean - 0.4).abs() < 0.02);
    assert!((fit.gamma[1].mean - 3.0).abs() < 3.0 * fit.gamma[1].sd + 0.05);
}

#[test]
fn standalone_fit_is_reproducible() {
    let data = scenario_subtrial(16, 0.3, 1);
    let priors = VaguePriorConfig::default();
    let c = McmcConfig::desk_scale().with_seed(77);
    let a = fit_standalone(&data, &priors, &c).unwrap();
    let b = fit_standalone(&data, &priors, &c).unwrap();
    assert_eq!(a.theta.draws, b.theta.draws);
    assert_eq!(a.sigma.draws, b.sigma.draws);
    let other = fit_standalone(&data, &priors, &c.with_seed(78)).unwrap();
    assert_ne!(a.theta.draws, other.theta.draws);
    assert_eq!(a.theta.draws.len(), c.chains * c.iterations);
}

#[test]
fn informative_treatment_prior_shrinks_towards_prior_mean() {
    let data = scenario_subtrial(20, 0.8, 9);
    let c = cfg(4_000, 500, 6);
    let vague = fit_standalone(&data, &VaguePriorConfig::default(), &c).unwrap();
    let tight = VaguePriorConfig {
        theta: NormalPrior::new(0.0, 0.01).unwrap(),
        ..VaguePriorConfig::default()
    };
    let shrunk = fit_standalone(&data, &tight, &c).unwrap();
    assert!(shrunk.theta.mean.abs() < 0.03);
    assert!(shrunk.theta.sd < vague.theta.sd);
}
