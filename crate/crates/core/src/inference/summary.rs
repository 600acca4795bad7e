use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooled MCMC draws of a scalar parameter with moment and interval
/// summaries. Draws are stored chain after chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    #[serde(skip)]
    pub draws: Vec<f64>,
    pub chains: usize,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl PosteriorSummary {
    pub fn from_chains(chains: Vec<Vec<f64>>, level: f64) -> Self {
        let n_chains = chains.len();
        PosteriorSummary::from_draws(chains.concat(), n_chains, level)
    }

    pub fn from_draws(draws: Vec<f64>, chains: usize, level: f64) -> Self {
        let n = draws.len();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        let tail = (1.0 - level) / 2.0;
        PosteriorSummary {
            lower: quantile(&sorted, tail),
            upper: quantile(&sorted, 1.0 - tail),
            draws,
            chains,
            mean,
            sd,
            level,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Draws of chain `i`, assuming equal-length chains.
    pub fn chain(&self, i: usize) -> &[f64] {
        let len = self.draws.len() / self.chains.max(1);
        &self.draws[i * len..(i + 1) * len]
    }

    pub fn chain_slices(&self) -> Vec<&[f64]> {
        (0..self.chains).map(|i| self.chain(i)).collect()
    }
}

/// Type-7 (linear interpolation) quantile of already sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of draws strictly above `threshold`.
pub fn posterior_prob_exceeds(summary: &PosteriorSummary, threshold: f64) -> Result<f64> {
    if summary.draws.is_empty() {
        return Err(Error::InvalidState("posterior has no draws".into()));
    }
    let above = summary.draws.iter().filter(|&&d| d > threshold).count();
    Ok(above as f64 / summary.draws.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_exceedances() {
        let draws: Vec<f64> = (0..10_000).map(|i| if i < 9_800 { 1.0 } else { 0.0 }).collect();
        let s = PosteriorSummary::from_draws(draws, 1, 0.95);
        assert_eq!(posterior_prob_exceeds(&s, 0.5).unwrap(), 0.98);
        assert_eq!(posterior_prob_exceeds(&s, 2.0).unwrap(), 0.0);
        assert_eq!(posterior_prob_exceeds(&s, -1e9).unwrap(), 1.0);
        // strict inequality
        assert_eq!(posterior_prob_exceeds(&s, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_draws_is_an_error() {
        let s = PosteriorSummary::from_draws(vec![], 1, 0.95);
        assert!(matches!(posterior_prob_exceeds(&s, 0.0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn moments_and_interval() {
        let draws: Vec<f64> = (0..=100).map(f64::from).collect();
        let s = PosteriorSummary::from_chains(vec![draws[..50].to_vec(), draws[50..].to_vec()], 0.9);
        assert_eq!(s.mean, 50.0);
        assert!((s.lower - 5.0).abs() < 1e-12);
        assert!((s.upper - 95.0).abs() < 1e-12);
        assert_eq!(s.chain(0).len(), 50);
    }

    proptest! {
        #[test]
        fn exceedance_is_nonincreasing(draws in prop::collection::vec(-5.0f64..5.0, 1..200),
                                       a in -6.0f64..6.0, b in -6.0f64..6.0) {
            let s = PosteriorSummary::from_draws(draws, 1, 0.95);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(posterior_prob_exceeds(&s, hi).unwrap() <= posterior_prob_exceeds(&s, lo).unwrap());
            prop_assert!(s.lower <= s.upper);
            prop_assert!(s.sd >= 0.0);
        }
    }
}
