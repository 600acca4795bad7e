//! Convergence diagnostics across chains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chains whose split-R̂ exceeds this value are flagged.
pub const R_HAT_THRESHOLD: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub r_hat: f64,
    pub ess: f64,
    /// `r_hat > R_HAT_THRESHOLD`.
    pub flagged: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Split-R̂ and effective sample size of one scalar parameter.
///
/// Each chain is split in half. R̂ is `sqrt(1 + B/(nW))`, where `W` is the
/// mean within-half variance and `B/n` the variance of the half means; this
/// omits the `(n-1)/n` factor on `W`, so R̂ ≥ 1 with equality iff the half
/// means coincide. The ESS uses the multi-chain autocorrelation with Geyer's
/// initial monotone sequence.
pub fn diagnostics(chains: &[&[f64]]) -> Result<ChainDiagnostics> {
    if chains.len() < 2 {
        return Err(Error::DiagnosticsUnavailable(format!(
            "need at least 2 chains, got {}",
            chains.len()
        )));
    }
    let half = chains.iter().map(|c| c.len()).min().unwrap_or(0) / 2;
    if half < 2 {
        return Err(Error::DiagnosticsUnavailable("chains are too short".into()));
    }
    let splits: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let c = &c[..2 * half];
            [&c[..half], &c[half..]]
        })
        .collect();
    let m = splits.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = splits.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let between = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let variances: Vec<f64> = splits
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    let within = mean(&variances);

    let r_hat = if within > 0.0 {
        (1.0 + between / within).sqrt()
    } else if between > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };

    let total = m * n;
    let ess = if within > 0.0 {
        let var_plus = (n - 1.0) / n * within + between;
        let rho = |lag: usize| -> f64 {
            let acov = splits
                .iter()
                .zip(&means)
                .map(|(c, &mu)| autocovariance(c, mu, lag))
                .sum::<f64>()
                / m;
            1.0 - (within - acov) / var_plus
        };
        let mut tau = -1.0;
        let mut prev_pair = f64::INFINITY;
        let mut lag = 0;
        while lag + 1 < half {
            let pair = (rho(lag) + rho(lag + 1)).min(prev_pair);
            if pair <= 0.0 {
                break;
            }
            tau += 2.0 * pair;
            prev_pair = pair;
            lag += 2;
        }
        let tau = tau.max(1.0 / total.log10().max(1.0));
        total / tau
    } else {
        total
    };

    Ok(ChainDiagnostics {
        r_hat,
        ess,
        flagged: r_hat > R_HAT_THRESHOLD,
    })
}
