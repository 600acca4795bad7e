//! Replicated basket-trial simulation and operating characteristics.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::inference::{posterior_prob_exceeds, DecisionConfig, McmcConfig};
use crate::model::{analyze, AnalysisSettings, Model};
use crate::rng::{derive_seed, stream_rng, tag};
use crate::trial::{generate_trial, Scenario};

pub const DESK_REPLICATES: usize = 1_000;
pub const FULL_REPLICATES: usize = 10_000;
/// Monte Carlo size of the marginal predictive priors in simulation studies.
pub const DESK_CPP_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub model: Model,
    pub replicates: usize,
    /// Model settings. `settings.mcmc.seed` is ignored: each replicate
    /// derives its own seed from `master_seed`.
    pub settings: AnalysisSettings,
    /// Efficacy thresholds at which exceedance probabilities are stored.
    pub thresholds: Vec<f64>,
    pub master_seed: u64,
}

impl StudyConfig {
    /// Reduced budget: 1,000 replicates, 2 chains of 4,000 draws after
    /// 1,000 burn-in, thresholds 0.25 and 0.30.
    pub fn desk_scale(scenario: Scenario, model: Model) -> Self {
        let mut settings = AnalysisSettings {
            mcmc: McmcConfig::desk_scale(),
            ..AnalysisSettings::default()
        };
        settings.proposed.cpp_draws = DESK_CPP_DRAWS;
        StudyConfig {
            scenario,
            model,
            replicates: DESK_REPLICATES,
            settings,
            thresholds: vec![0.25, 0.30],
            master_seed: 0,
        }
    }

    /// Full budget: 10,000 replicates of 2 chains with 10,000 draws each.
    pub fn full_scale(scenario: Scenario, model: Model) -> Self {
        StudyConfig {
            replicates: FULL_REPLICATES,
            settings: AnalysisSettings::default(),
            ..StudyConfig::desk_scale(scenario, model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return invalid_arg("at least one replicate is required");
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !t.is_finite()) {
            return invalid_arg("need at least one finite efficacy threshold");
        }
        self.scenario.validate()?;
        self.settings.mcmc.validate()?;
        self.settings.decision.validate()
    }

    fn threshold_index(&self, delta_u: f64) -> Result<usize> {
        self.thresholds
            .iter()
            .position(|&t| t == delta_u)
            .map_or_else(|| invalid_arg(format!("threshold {delta_u} was not stored")), Ok)
    }
}

pub fn replicate_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Per-subtrial results of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub means: Vec<f64>,
    pub ci_widths: Vec<f64>,
    /// `prob_exceeds[t][k] = P(theta_k > thresholds[t])`.
    pub prob_exceeds: Vec<Vec<f64>>,
    pub ex_probability: Option<Vec<f64>>,
}

impl ReplicateResult {
    pub fn decisions(&self, threshold: usize, zeta: f64) -> Vec<bool> {
        let rule = DecisionConfig { delta_u: 0.0, zeta };
        self.prob_exceeds[threshold].iter().map(|&p| rule.is_go(p)).collect()
    }
}

/// Generate one trial from `seed` and analyse it.
pub fn run_replicate(
    scenario: &Scenario,
    model: Model,
    settings: &AnalysisSettings,
    thresholds: &[f64],
    seed: u64,
    index: usize,
) -> Result<ReplicateResult> {
    let trial = generate_trial(scenario, &mut stream_rng(seed, tag::DATA))?;
    let mut settings = settings.clone();
    settings.mcmc.seed = derive_seed(seed, tag::FIT);
    let report = analyze(&trial, model, &settings)?;
    let prob_exceeds = thresholds
        .iter()
        .map(|&t| {
            report
                .subtrials
                .iter()
                .map(|s| posterior_prob_exceeds(&s.summary, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let ex_probability: Option<Vec<f64>> = report.subtrials.iter().map(|s| s.ex_probability).collect();
    Ok(ReplicateResult {
        index,
        means: report.subtrials.iter().map(|s| s.summary.mean).collect(),
        ci_widths: report.subtrials.iter().map(|s| s.summary.ci_width()).collect(),
        prob_exceeds,
        ex_probability,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    /// Successful replicates in index order.
    pub replicates: Vec<ReplicateResult>,
    /// Replicates whose fit failed, with the error message.
    pub failures: Vec<(usize, String)>,
}

/// Run all replicates in parallel; results do not depend on the number of
/// worker threads.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let outcomes: Vec<Result<ReplicateResult>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            run_replicate(
                &cfg.scenario,
                cfg.model,
                &cfg.settings,
                &cfg.thresholds,
                replicate_seed(cfg.master_seed, i),
                i,
            )
        })
        .collect();
    let mut replicates = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => replicates.push(r),
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if replicates.is_empty() {
        return invalid_arg(format!("all {} replicates failed", cfg.replicates));
    }
    Ok(StudyResult {
        config: cfg.clone(),
        replicates,
        failures,
    })
}

/// `bias = mean(estimates) - truth`, `mse = mean((estimates - truth)²)`.
pub fn bias_mse(estimates: &[f64], truth: f64) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return invalid_arg("no estimates");
    }
    let n = estimates.len() as f64;
    let bias = estimates.iter().map(|e| e - truth).sum::<f64>() / n;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n;
    Ok((bias, mse))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRates {
    /// Fraction of replicates with a Go, per subtrial.
    pub go_rate: Vec<f64>,
    /// Subtrials (0-based) with a null effect; their Go rate is a type-I
    /// error analogue.
    pub null_subtrials: Vec<usize>,
    /// Subtrials with a positive effect; their Go rate is a power analogue.
    pub active_subtrials: Vec<usize>,
    /// Fraction of replicates with at least one Go among null subtrials.
    /// `None` when no subtrial is null.
    pub overall_erroneous_go: Option<f64>,
}

pub fn decision_rates(decisions: &[Vec<bool>], theta: &[f64]) -> Result<DecisionRates> {
    if decisions.is_empty() {
        return invalid_arg("no replicates");
    }
    let k = theta.len();
    if let Some(row) = decisions.iter().find(|r| r.len() != k) {
        return invalid_arg(format!("decision row of length {} for {k} subtrials", row.len()));
    }
    let m = decisions.len() as f64;
    let go_rate = (0..k)
        .map(|j| decisions.iter().filter(|r| r[j]).count() as f64 / m)
        .collect();
    let null_subtrials: Vec<usize> = (0..k).filter(|&j| theta[j] == 0.0).collect();
    let active_subtrials = (0..k).filter(|&j| theta[j] > 0.0).collect();
    let overall_erroneous_go = (!null_subtrials.is_empty())
        .then(|| decisions.iter().filter(|r| null_subtrials.iter().any(|&j| r[j])).count() as f64 / m);
    Ok(DecisionRates {
        go_rate,
        null_subtrials,
        active_subtrials,
        overall_erroneous_go,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub scenario: String,
    pub model: Model,
    pub theta: Vec<f64>,
    pub replicates: usize,
    pub failed: usize,
    pub delta_u: f64,
    pub zeta: f64,
    pub bias: Vec<f64>,
    pub mse: Vec<f64>,
    pub ci_width: Vec<f64>,
    pub rates: DecisionRates,
    pub ex_probability: Option<Vec<f64>>,
}

impl StudyResult {
    pub fn decisions(&self, delta_u: f64, zeta: f64) -> Result<Vec<Vec<bool>>> {
        let t = self.config.threshold_index(delta_u)?;
        Ok(self.replicates.iter().map(|r| r.decisions(t, zeta)).collect())
    }

    /// Aggregate at one stored threshold and evidence level, without
    /// refitting.
    pub fn operating_characteristics(&self, delta_u: f64, zeta: f64) -> Result<OperatingCharacteristics> {
        let theta = &self.config.scenario.theta;
        let k = theta.len();
        let column = |f: &dyn Fn(&ReplicateResult) -> f64| -> Vec<f64> { self.replicates.iter().map(f).collect() };
        let mut bias = Vec::with_capacity(k);
        let mut mse = Vec::with_capacity(k);
        let mut ci_width = Vec::with_capacity(k);
        for (j, &truth) in theta.iter().enumerate() {
            let (b, m) = bias_mse(&column(&|r| r.means[j]), truth)?;
            bias.push(b);
            mse.push(m);
            ci_width.push(mean(&column(&|r| r.ci_widths[j])));
        }
        let ex_probability = self.replicates[0]
            .ex_probability
            .is_some()
            .then(|| (0..k).map(|j| mean(&column(&|r| r.ex_probability.as_ref().map_or(0.0, |p| p[j])))).collect());
        Ok(OperatingCharacteristics {
            scenario: self.config.scenario.name.clone(),
            model: self.config.model,
            theta: theta.clone(),
            replicates: self.replicates.len(),
            failed: self.failures.len(),
            delta_u,
            zeta,
            bias,
            mse,
            ci_width,
            rates: decision_rates(&self.decisions(delta_u, zeta)?, theta)?,
            ex_probability,
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Tidy long format: `scenario,model,subtrial,metric,value`. Subtrial is
/// empty for trial-level metrics.
pub fn write_tidy_csv<W: Write>(results: &[OperatingCharacteristics], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scenario", "model", "subtrial", "metric", "value"])?;
    for oc in results {
        let model = oc.model.to_string();
        for j in 0..oc.theta.len() {
            let sub = (j + 1).to_string();
            let kind = if oc.theta[j] == 0.0 { "type1" } else { "power" };
            let mut rows = vec![
                ("theta", oc.theta[j]),
                ("bias", oc.bias[j]),
                ("mse", oc.mse[j]),
                ("ci_width", oc.ci_width[j]),
                ("go_rate", oc.rates.go_rate[j]),
                (kind, oc.rates.go_rate[j]),
            ];
            if let Some(ex) = &oc.ex_probability {
                rows.push(("ex_probability", ex[j]));
            }
            for (metric, value) in rows {
                wtr.write_record([oc.scenario.as_str(), &model, &sub, metric, &value.to_string()])?;
            }
        }
        let mut trial_rows = vec![
            ("replicates", oc.replicates as f64),
            ("failed", oc.failed as f64),
            ("delta_u", oc.delta_u),
            ("zeta", oc.zeta),
        ];
        if let Some(o) = oc.rates.overall_erroneous_go {
            trial_rows.push(("overall_erroneous_go", o));
        }
        for (metric, value) in trial_rows {
            wtr.write_record([oc.scenario.as_str(), &model, "", metric, &value.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Plot data: one row per scenario, subtrial and model with the
/// per-subtrial metrics as columns.
pub fn write_plot_data_csv<W: Write>(results: &[OperatingCharacteristics], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scenario", "subtrial", "model", "theta", "bias", "mse", "ci_width", "go_rate"])?;
    for oc in results {
        for j in 0..oc.theta.len() {
            wtr.write_record([
                oc.scenario.clone(),
                (j + 1).to_string(),
                oc.model.to_string(),
                oc.theta[j].to_string(),
                oc.bias[j].to_string(),
                oc.mse[j].to_string(),
                oc.ci_width[j].to_string(),
                oc.rates.go_rate[j].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Human-readable table: Go rate per subtrial and the overall erroneous-Go
/// rate, one row per scenario and model.
pub fn summary_table(results: &[OperatingCharacteristics]) -> String {
    let k = results.iter().map(|r| r.theta.len()).max().unwrap_or(0);
    let mut out = format!("{:<10} {:<9}", "scenario", "model");
    for j in 1..=k {
        let _ = write!(out, " {:>8}", format!("k={j}"));
    }
    out.push_str(&format!(" {:>8} {:>6}\n", "overall", "failed"));
    for oc in results {
        let _ = write!(out, "{:<10} {:<9}", oc.scenario, oc.model.to_string());
        for j in 0..k {
            match oc.rates.go_rate.get(j) {
                Some(r) => {
                    let _ = write!(out, " {r:>8.4}");
                }
                None => out.push_str(&format!(" {:>8}", "")),
            }
        }
        let overall = oc.rates.overall_erroneous_go.map_or("-".to_string(), |o| format!("{o:.4}"));
        let _ = writeln!(out, " {overall:>8} {:>6}", oc.failed);
    }
    out
}
