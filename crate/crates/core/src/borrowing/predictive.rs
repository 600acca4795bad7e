//! Commensurate predictive priors and their weighted combination.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::hellinger::write_square_csv;
use super::SpikeSlabPrior;
use crate::error::{invalid_arg, Error, Result};
use crate::inference::{NormalPrior, PosteriorSummary};

/// Smallest Monte Carlo size accepted for marginal predictive moments.
pub const MIN_CPP_DRAWS: usize = 100_000;
pub const DEFAULT_CPP_DRAWS: usize = 1_000_000;

/// Slab probability of the spike-and-slab prior for a pair of subtrials at
/// Hellinger distance `d`: the distance itself.
pub fn slab_weight(d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return invalid_arg(format!("Hellinger distance {d} outside [0, 1]"));
    }
    Ok(d)
}

/// Normal summary `N(mean, sd²)` of one marginal commensurate predictive
/// prior, i.e. of the hypothetical effect borrowed from subtrial `source`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommensurateComponent {
    pub source: usize,
    pub mean: f64,
    pub sd: f64,
}

fn check_source(source: &PosteriorSummary, prior: &SpikeSlabPrior, mc_draws: usize) -> Result<()> {
    if source.draws.is_empty() {
        return Err(Error::InvalidState("source posterior has no draws".into()));
    }
    if mc_draws < MIN_CPP_DRAWS {
        return invalid_arg(format!("need at least {MIN_CPP_DRAWS} Monte Carlo draws, got {mc_draws}"));
    }
    prior.validate()?;
    if prior.slab_weight > 0.0 && prior.lower == 0.0 {
        return invalid_arg("a slab reaching zero precision gives an infinite predictive variance");
    }
    Ok(())
}

/// Moments of the marginal commensurate predictive prior
/// `theta* | theta, nu ~ N(theta, 1/nu²)` with `theta` drawn from the
/// source posterior and `nu` from `prior`, integrated over both.
///
/// `nu` is drawn by stratified inversion of the spike-and-slab CDF and
/// `theta` by resampling the source draws. The conditional normal step is
/// integrated exactly: each draw contributes mean `theta` and variance
/// `nu⁻²`, so `mean = E[theta]` and `sd² = Var(theta) + E[nu⁻²]`.
pub fn marginal_cpp_moments<R: Rng + ?Sized>(
    source: &PosteriorSummary,
    prior: &SpikeSlabPrior,
    mc_draws: usize,
    rng: &mut R,
    source_index: usize,
) -> Result<CommensurateComponent> {
    check_source(source, prior, mc_draws)?;
    let n = mc_draws as f64;
    let len = source.draws.len();
    let (mut mean, mut m2, mut inv_sq) = (0.0, 0.0, 0.0);
    for i in 0..mc_draws {
        let u = (i as f64 + rng.random::<f64>()) / n;
        let nu = prior.quantile(u);
        let theta = source.draws[rng.random_range(0..len)];
        let delta = theta - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (theta - mean);
        inv_sq += 1.0 / (nu * nu);
    }
    Ok(CommensurateComponent {
        source: source_index,
        mean,
        sd: (m2 / n + inv_sq / n).sqrt(),
    })
}

/// Same moments by plain simulation of `theta*`, without stratification or
/// conditional integration. Noisier; kept as a cross-check.
pub fn marginal_cpp_moments_simulated<R: Rng + ?Sized>(
    source: &PosteriorSummary,
    prior: &SpikeSlabPrior,
    mc_draws: usize,
    rng: &mut R,
    source_index: usize,
) -> Result<CommensurateComponent> {
    check_source(source, prior, mc_draws)?;
    let len = source.draws.len();
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..mc_draws {
        let theta = source.draws[rng.random_range(0..len)];
        let nu = prior.sample(rng);
        let draw = theta + rng.sample::<f64, _>(StandardNormal) / nu;
        let delta = draw - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (draw - mean);
    }
    Ok(CommensurateComponent {
        source: source_index,
        mean,
        sd: (m2 / mc_draws as f64).sqrt(),
    })
}

/// `p_k = exp(-d_k / s0) / Σ exp(-d / s0)`.
pub fn softmax_weights(distances: &[f64], s0: f64) -> Result<Vec<f64>> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return invalid_arg(format!("softmax scale must be positive, got {s0}"));
    }
    if distances.is_empty() {
        return invalid_arg("no distances to weight");
    }
    if let Some(d) = distances.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return invalid_arg(format!("distance {d} outside [0, 1]"));
    }
    let min = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = distances.iter().map(|d| (-(d - min) / s0).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// Weighted combination of marginal commensurate predictive priors: a
/// normal prior for the target effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MppPrior {
    pub mean: f64,
    pub variance: f64,
    /// Complementary subtrial indices, aligned with `weights`.
    pub sources: Vec<usize>,
    pub weights: Vec<f64>,
}

impl MppPrior {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn as_normal(&self) -> NormalPrior {
        NormalPrior {
            mean: self.mean,
            sd: self.sd(),
        }
    }

    /// A prior that does not come from borrowing, e.g. the vague
    /// `N(0, 10²)`.
    pub fn fixed(mean: f64, sd: f64) -> Self {
        MppPrior {
            mean,
            variance: sd * sd,
            sources: Vec::new(),
            weights: Vec::new(),
        }
    }
}

/// `mean = Σ p λ`, `variance = Σ p² ξ²`, treating the components as
/// independent.
pub fn combine_mpp(components: &[CommensurateComponent], weights: &[f64]) -> Result<MppPrior> {
    if components.is_empty() || components.len() != weights.len() {
        return invalid_arg(format!(
            "{} components but {} weights",
            components.len(),
            weights.len()
        ));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return invalid_arg("weights must be non-negative and sum to 1");
    }
    if components.iter().any(|c| !(c.sd > 0.0 && c.sd.is_finite()) || !c.mean.is_finite()) {
        return invalid_arg("component sds must be positive and finite");
    }
    let mean = components.iter().zip(weights).map(|(c, p)| p * c.mean).sum();
    let variance = components.iter().zip(weights).map(|(c, p)| (p * c.sd).powi(2)).sum();
    Ok(MppPrior {
        mean,
        variance,
        sources: components.iter().map(|c| c.source).collect(),
        weights: weights.to_vec(),
    })
}

/// `p[source][target]`: the weight subtrial `source` receives in the prior
/// for subtrial `target`. Each column sums to one; the diagonal is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub p: Vec<Vec<f64>>,
}

impl WeightMatrix {
    /// Assemble from per-target MPP priors (sources are 1-based).
    pub fn from_priors(priors: &[MppPrior]) -> Self {
        let k = priors.len();
        let mut p = vec![vec![0.0; k]; k];
        for (target, prior) in priors.iter().enumerate() {
            for (&src, &w) in prior.sources.iter().zip(&prior.weights) {
                p[src - 1][target] = w;
            }
        }
        WeightMatrix { p }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_square_csv(&self.p, writer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slab_weight_is_identity_on_unit_interval() {
        assert_eq!(slab_weight(0.0).unwrap(), 0.0);
        assert_eq!(slab_weight(1.0).unwrap(), 1.0);
        assert_eq!(slab_weight(0.3428).unwrap(), 0.3428);
        assert!(slab_weight(1.01).is_err());
        assert!(slab_weight(-0.01).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_weights(&[0.2, 0.2, 0.2], 0.15).unwrap();
        assert!(p.iter().all(|&x| x == 1.0 / 3.0));
        // p_1 = 1 / (1 + e^{-2})
        let p = softmax_weights(&[0.1, 0.4], 0.15).unwrap();
        assert!((p[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((p[1] - 0.119_202_922_022_117_7).abs() < 1e-12);
        let p = softmax_weights(&[0.0, 0.5, 1.0], 1e6).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-5));
        assert_eq!(softmax_weights(&[0.7], 0.15).unwrap(), vec![1.0]);
    }

    #[test]
    fn softmax_errors() {
        assert!(softmax_weights(&[0.1], 0.0).is_err());
        assert!(softmax_weights(&[0.1], -1.0).is_err());
        assert!(softmax_weights(&[1.5], 0.1).is_err());
        assert!(softmax_weights(&[], 0.1).is_err());
    }

    #[test]
    fn combine_examples() {
        let c = |source, mean, sd| CommensurateComponent { source, mean, sd };
        let m = combine_mpp(&[c(1, 1.0, 0.2), c(2, 1.0, 0.2)], &[0.5, 0.5]).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-15 && (m.variance - 0.02).abs() < 1e-15);
        let m = combine_mpp(&[c(1, 0.3, 0.1), c(2, 0.6, 0.2)], &[1.0, 0.0]).unwrap();
        assert!((m.mean - 0.3).abs() < 1e-15 && (m.variance - 0.01).abs() < 1e-15);
        let m = combine_mpp(&[c(1, 0.3, 0.1), c(2, 0.6, 0.2)], &[0.8801, 0.1199]).unwrap();
        assert!((m.mean - 0.3360).abs() < 5e-5, "{}", m.mean);
        assert!((m.variance - 0.00832).abs() < 5e-6, "{}", m.variance);
        assert!(combine_mpp(&[c(1, 0.3, 0.1)], &[0.5, 0.5]).is_err());
        assert!(combine_mpp(&[c(1, 0.3, 0.1), c(2, 0.1, 0.1)], &[0.7, 0.7]).is_err());
    }

    #[test]
    fn weight_matrix_layout() {
        let priors = vec![
            MppPrior { mean: 0.0, variance: 1.0, sources: vec![2, 3], weights: vec![0.7, 0.3] },
            MppPrior { mean: 0.0, variance: 1.0, sources: vec![1, 3], weights: vec![0.4, 0.6] },
            MppPrior { mean: 0.0, variance: 1.0, sources: vec![1, 2], weights: vec![0.5, 0.5] },
        ];
        let w = WeightMatrix::from_priors(&priors);
        assert_eq!(w.p[1][0], 0.7);
        assert_eq!(w.p[0][1], 0.4);
        for t in 0..3 {
            assert_eq!(w.p[t][t], 0.0);
            assert!(((0..3).map(|s| w.p[s][t]).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn distances() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..10)
    }

    proptest! {
        #[test]
        fn softmax_properties(d in distances(), s0 in 0.01f64..5.0, shift in 0usize..10) {
            let p = softmax_weights(&d, s0).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            for i in 0..d.len() {
                for j in 0..d.len() {
                    if d[i] < d[j] {
                        prop_assert!(p[i] > p[j] || p[j] == 0.0);
                    }
                    if d[i] == d[j] {
                        prop_assert_eq!(p[i], p[j]);
                    }
                }
            }
            // permutation equivariance
            let mut rotated = d.clone();
            rotated.rotate_left(shift % d.len());
            let mut expected = p.clone();
            expected.rotate_left(shift % d.len());
            let q = softmax_weights(&rotated, s0).unwrap();
            for (a, b) in q.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
