use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};

/// Spike-and-slab prior on a commensurability precision `nu`: uniform on
/// `[lower, upper]` with probability `slab_weight`, otherwise a point mass
/// at `spike`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabPrior {
    pub lower: f64,
    pub upper: f64,
    pub spike: f64,
    pub slab_weight: f64,
}

pub const DEFAULT_SLAB_LOWER: f64 = 0.01;
pub const DEFAULT_SLAB_UPPER: f64 = 1.0;
pub const DEFAULT_SPIKE: f64 = 100.0;

impl SpikeSlabPrior {
    pub fn new(lower: f64, upper: f64, spike: f64, slab_weight: f64) -> Result<Self> {
        let prior = SpikeSlabPrior {
            lower,
            upper,
            spike,
            slab_weight,
        };
        prior.validate()?;
        Ok(prior)
    }

    /// Default bounds `[0.01, 1]` and spike at 100.
    pub fn with_weight(slab_weight: f64) -> Result<Self> {
        Self::new(DEFAULT_SLAB_LOWER, DEFAULT_SLAB_UPPER, DEFAULT_SPIKE, slab_weight)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = 0.0 <= self.lower && self.lower < self.upper && self.upper < self.spike;
        if !ordered || !self.spike.is_finite() {
            return invalid_arg(format!(
                "spike-and-slab needs 0 <= lower < upper < spike, got ({}, {}, {})",
                self.lower, self.upper, self.spike
            ));
        }
        if !(0.0..=1.0).contains(&self.slab_weight) {
            return invalid_arg(format!("slab weight {} outside [0, 1]", self.slab_weight));
        }
        Ok(())
    }

    /// `P(nu <= u)`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u < self.lower {
            0.0
        } else if u <= self.upper {
            self.slab_weight * (u - self.lower) / (self.upper - self.lower)
        } else if u < self.spike {
            self.slab_weight
        } else {
            1.0
        }
    }

    /// `P(nu = spike)`.
    pub fn spike_probability(&self) -> f64 {
        1.0 - self.slab_weight
    }

    /// Generalised inverse of [`cdf`](Self::cdf) for `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p < self.slab_weight {
            self.lower + (self.upper - self.lower) * p / self.slab_weight
        } else {
            self.spike
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `E[nu⁻²]`, the variance a draw of `nu` adds to a commensurate
    /// predictive prior. Infinite when the slab reaches zero.
    pub fn expected_inverse_square(&self) -> f64 {
        let slab = if self.slab_weight > 0.0 {
            self.slab_weight * (1.0 / self.lower - 1.0 / self.upper) / (self.upper - self.lower)
        } else {
            0.0
        };
        slab + self.spike_probability() / (self.spike * self.spike)
    }
}
