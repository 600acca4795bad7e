use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BasketTrialData, Scenario, SubtrialData};
use crate::error::{invalid_arg, Result};

/// Block randomisation: a uniformly random permutation of `n/2` ones and
/// `n/2` zeros.
pub fn assign_treatment<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<u8>> {
    if n == 0 || n % 2 == 1 {
        return invalid_arg(format!("block randomisation needs an even positive size, got {n}"));
    }
    let mut t: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    t.shuffle(rng);
    Ok(t)
}

/// Simulate subtrial `k` (1-based) of `scenario` from the linear model
/// `y = gamma_0 + z'gamma + T theta_k + e`, `e ~ N(0, sigma²)`.
pub fn generate_subtrial<R: Rng + ?Sized>(
    scenario: &Scenario,
    k: usize,
    rng: &mut R,
) -> Result<SubtrialData> {
    scenario.validate()?;
    if k == 0 || k > scenario.num_subtrials() {
        return invalid_arg(format!(
            "subtrial {k} out of range 1..={}",
            scenario.num_subtrials()
        ));
    }
    let n = scenario.n[k - 1];
    let covariates: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            scenario
                .covariate_means
                .iter()
                .map(|&m| m + scenario.covariate_sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let treatment = assign_treatment(n, rng)?;
    let theta = scenario.theta[k - 1];
    let y = covariates
        .iter()
        .zip(&treatment)
        .map(|(z, &t)| {
            let eta = linear_predictor(scenario, z, t, theta);
            eta + scenario.sigma * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    SubtrialData::new(k, y, covariates, treatment)
}

pub(crate) fn linear_predictor(scenario: &Scenario, z: &[f64], t: u8, theta: f64) -> f64 {
    scenario.gamma[0]
        + z.iter().zip(&scenario.gamma[1..]).map(|(a, b)| a * b).sum::<f64>()
        + f64::from(t) * theta
}

/// Simulate every subtrial of `scenario` in index order from one stream.
pub fn generate_trial<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<BasketTrialData> {
    let subtrials = (1..=scenario.num_subtrials())
        .map(|k| generate_subtrial(scenario, k, rng))
        .collect::<Result<Vec<_>>>()?;
    BasketTrialData::new(subtrials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng::seeded;

    #[test]
    fn treatment_is_balanced() {
        let mut rng = seeded(1);
        let t = assign_treatment(10, &mut rng).unwrap();
        assert_eq!(t.iter().filter(|&&x| x == 1).count(), 5);
        let t = assign_treatment(2, &mut rng).unwrap();
        assert!(t == vec![0, 1] || t == vec![1, 0]);
        for n in (2..60).step_by(2) {
            let t = assign_treatment(n, &mut rng).unwrap();
            assert_eq!(t.iter().map(|&x| x as usize).sum::<usize>(), n / 2);
        }
    }

    #[test]
    fn treatment_rejects_odd_and_zero() {
        let mut rng = seeded(1);
        assert!(matches!(assign_treatment(7, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(assign_treatment(0, &mut rng).is_err());
    }

    #[test]
    fn treatment_is_deterministic_per_seed() {
        let a = assign_treatment(20, &mut seeded(9)).unwrap();
        let b = assign_treatment(20, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_predictor_arithmetic() {
        let s = Scenario::preset("S5").unwrap();
        let treated = linear_predictor(&s, &[6.0, 4.0], 1, 0.45);
        let control = linear_predictor(&s, &[6.0, 4.0], 0, 0.45);
        assert!((treated - 28.65).abs() < 1e-12);
        assert!((control - 28.20).abs() < 1e-12);
    }

    #[test]
    fn noiseless_outcomes_equal_predictor() {
        let mut s = Scenario::preset("S5").unwrap();
        s.sigma = 0.0;
        let sub = generate_subtrial(&s, 3, &mut seeded(4)).unwrap();
        for i in 0..sub.len() {
            let eta = linear_predictor(&s, &sub.covariates[i], sub.treatment[i], 0.45);
            assert_eq!(sub.y[i], eta);
        }
    }

    #[test]
    fn subtrial_index_checked() {
        let s = Scenario::preset("S1").unwrap();
        assert!(generate_subtrial(&s, 0, &mut seeded(0)).is_err());
        assert!(generate_subtrial(&s, 7, &mut seeded(0)).is_err());
    }

    #[test]
    fn trial_layout() {
        let s = Scenario::preset("S9").unwrap();
        let trial = generate_trial(&s, &mut seeded(3)).unwrap();
        assert_eq!(trial.num_subtrials(), 6);
        assert_eq!(trial.total_patients(), 90);
        let sizes: Vec<usize> = trial.subtrials.iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![10, 10, 14, 16, 20, 20]);
        assert_eq!(trial, generate_trial(&s, &mut seeded(3)).unwrap());
    }
}
