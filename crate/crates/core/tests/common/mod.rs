#![allow(dead_code)]

use basket_core::inference::{diagnostics, McmcConfig, PosteriorSummary};
use basket_core::trial::{generate_subtrial, BasketTrialData, Scenario, SubtrialData};
use basket_core::rng::seeded;

/// Monte Carlo standard error of the posterior mean, from the multi-chain
/// effective sample size.
pub fn mc_se(s: &PosteriorSummary) -> f64 {
    let ess = diagnostics(&s.chain_slices()).expect("two chains").ess;
    s.sd / ess.sqrt()
}

/// |a - b| within `z` combined Monte Carlo standard errors.
pub fn means_agree(a: &PosteriorSummary, b: &PosteriorSummary, z: f64) -> bool {
    let tol = z * (mc_se(a).powi(2) + mc_se(b).powi(2)).sqrt();
    (a.mean - b.mean).abs() <= tol
}

pub fn cfg(iterations: usize, burn_in: usize, seed: u64) -> McmcConfig {
    McmcConfig {
        iterations,
        burn_in,
        seed,
        ..McmcConfig::default()
    }
}

/// `k` exact copies of one simulated subtrial of size `n`.
pub fn identical_trial(k: usize, n: usize, theta: f64, seed: u64) -> BasketTrialData {
    let mut scenario = Scenario::with_theta("copies", vec![theta]);
    scenario.n = vec![n];
    let base = generate_subtrial(&scenario, 1, &mut seeded(seed)).unwrap();
    let subtrials: Vec<SubtrialData> = (1..=k).map(|j| SubtrialData { k: j, ..base.clone() }).collect();
    BasketTrialData::new(subtrials).unwrap()
}
