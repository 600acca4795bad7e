use rand::Rng;
use rand_distr::StandardNormal;

/// Log density of the half-normal `HN(scale)` up to an additive constant.
pub fn half_normal_ln_pdf(x: f64, scale: f64) -> f64 {
    if x > 0.0 {
        -0.5 * (x / scale).powi(2)
    } else {
        f64::NEG_INFINITY
    }
}

/// Random-walk Metropolis on the log of a positive parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaleWalk {
    pub step: f64,
}

impl LogScaleWalk {
    /// One Metropolis step targeting `exp(ln_target(x))` on `x > 0`.
    ///
    /// The proposal is symmetric on `log x`, so the acceptance ratio carries
    /// the Jacobian `x'/x`.
    pub fn update<R, F>(&self, current: f64, ln_target: F, rng: &mut R) -> (f64, bool)
    where
        R: Rng + ?Sized,
        F: Fn(f64) -> f64,
    {
        let jump = self.step * rng.sample::<f64, _>(StandardNormal);
        let proposal = current * jump.exp();
        let log_ratio = ln_target(proposal) - ln_target(current) + jump;
        if rng.random::<f64>().ln() < log_ratio {
            (proposal, true)
        } else {
            (current, false)
        }
    }
}
