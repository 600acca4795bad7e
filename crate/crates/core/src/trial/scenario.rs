use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data-generating settings for a simulated basket trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// True treatment effect per subtrial.
    pub theta: Vec<f64>,
    /// Intercept followed by one coefficient per covariate.
    pub gamma: Vec<f64>,
    pub sigma: f64,
    /// Subtrial sample sizes; each must be even.
    pub n: Vec<usize>,
    pub covariate_means: Vec<f64>,
    pub covariate_sd: f64,
}

const DEFAULT_N: [usize; 6] = [10, 10, 14, 16, 20, 20];

const PRESET_THETA: [[f64; 6]; 9] = [
    [0.49, 0.67, 0.54, 0.43, 0.79, 0.35],
    [0.35, 0.37, 0.80, 1.30, 1.38, 0.40],
    [0.29, 0.77, 0.68, 0.75, 0.33, 0.30],
    [0.59, 1.17, 1.02, 0.95, 0.13, 0.75],
    [0.45, 0.45, 0.45, 0.45, 0.45, 0.45],
    [0.30, 0.30, 0.30, 0.30, 0.30, 0.30],
    [0.0, 0.0, 0.0, 0.0, 0.37, 0.37],
    [0.33, 0.0, 0.82, 0.90, 0.0, 0.83],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
];

impl Scenario {
    /// A six-subtrial scenario with the default regression settings
    /// (`gamma = (5, 3, 1.3)`, `sigma = 0.4`, covariates `N(6, 0.2²)` and
    /// `N(4, 0.2²)`, sample sizes `10, 10, 14, 16, 20, 20`).
    pub fn with_theta(name: impl Into<String>, theta: Vec<f64>) -> Self {
        Scenario {
            name: name.into(),
            n: DEFAULT_N[..theta.len().min(6)].to_vec(),
            theta,
            gamma: vec![5.0, 3.0, 1.3],
            sigma: 0.4,
            covariate_means: vec![6.0, 4.0],
            covariate_sd: 0.2,
        }
    }

    /// Built-in scenarios `S1` to `S9`.
    pub fn presets() -> Vec<Scenario> {
        PRESET_THETA
            .iter()
            .enumerate()
            .map(|(i, theta)| Scenario::with_theta(format!("S{}", i + 1), theta.to_vec()))
            .collect()
    }

    pub fn preset(name: &str) -> Result<Scenario> {
        Scenario::presets()
            .into_iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))
    }

    pub fn num_subtrials(&self) -> usize {
        self.theta.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariate_means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("scenario {}: {m}", self.name)));
        if self.theta.is_empty() {
            return bad("no subtrials".into());
        }
        if self.theta.len() != self.n.len() {
            return bad(format!(
                "{} treatment effects but {} sample sizes",
                self.theta.len(),
                self.n.len()
            ));
        }
        if self.gamma.len() != self.covariate_means.len() + 1 {
            return bad(format!(
                "gamma needs {} entries (intercept plus one per covariate)",
                self.covariate_means.len() + 1
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if !(self.covariate_sd >= 0.0 && self.covariate_sd.is_finite()) {
            return bad(format!("covariate sd must be non-negative, got {}", self.covariate_sd));
        }
        if let Some(n) = self.n.iter().find(|&&n| n == 0 || n % 2 == 1) {
            return bad(format!("sample sizes must be even and positive, got {n}"));
        }
        let all_finite = self
            .theta
            .iter()
            .chain(&self.gamma)
            .chain(&self.covariate_means)
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioEntry {
    theta: Vec<f64>,
    n: Vec<usize>,
    #[serde(default = "default_gamma")]
    gamma: Vec<f64>,
    #[serde(default = "default_sigma")]
    sigma: f64,
    #[serde(default = "default_means")]
    covariate_means: Vec<f64>,
    #[serde(default = "default_sd")]
    covariate_sd: f64,
}

fn default_gamma() -> Vec<f64> {
    vec![5.0, 3.0, 1.3]
}
fn default_sigma() -> f64 {
    0.4
}
fn default_means() -> Vec<f64> {
    vec![6.0, 4.0]
}
fn default_sd() -> f64 {
    0.2
}

/// Parse scenario definitions from TOML text: one table per scenario, keyed
/// by its name.
///
/// ```toml
/// [S10]
/// theta = [0.0, 0.2, 0.4]
/// n = [12, 12, 20]
/// gamma = [5.0, 3.0, 1.3]   # optional
/// sigma = 0.4               # optional
/// ```
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let entries: BTreeMap<String, ScenarioEntry> =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    entries
        .into_iter()
        .map(|(name, e)| {
            let s = Scenario {
                name,
                theta: e.theta,
                gamma: e.gamma,
                sigma: e.sigma,
                n: e.n,
                covariate_means: e.covariate_means,
                covariate_sd: e.covariate_sd,
            };
            s.validate().map_err(|err| Error::Config(err.to_string()))?;
            Ok(s)
        })
        .collect()
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    parse_scenarios(&std::fs::read_to_string(path)?)
}

pub fn scenarios_to_toml(scenarios: &[Scenario]) -> Result<String> {
    let entries: BTreeMap<&str, ScenarioEntry> = scenarios
        .iter()
        .map(|s| {
            (
                s.name.as_str(),
                ScenarioEntry {
                    theta: s.theta.clone(),
                    n: s.n.clone(),
                    gamma: s.gamma.clone(),
                    sigma: s.sigma,
                    covariate_means: s.covariate_means.clone(),
                    covariate_sd: s.covariate_sd,
                },
            )
        })
        .collect();
    toml::to_string(&entries).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_scenarios(path: &Path, scenarios: &[Scenario]) -> Result<()> {
    std::fs::write(path, scenarios_to_toml(scenarios)?)?;
    Ok(())
}

/// Look a scenario up in an optional config file first, then among the
/// built-in presets.
pub fn resolve_scenario(name: &str, config: Option<&Path>) -> Result<Scenario> {
    if let Some(path) = config {
        if let Some(s) = load_scenarios(path)?.into_iter().find(|s| s.name == name) {
            return Ok(s);
        }
    }
    Scenario::preset(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_table_rows() {
        let presets = Scenario::presets();
        assert_eq!(presets.len(), 9);
        assert_eq!(Scenario::preset("S5").unwrap().theta, vec![0.45; 6]);
        assert_eq!(
            Scenario::preset("S2").unwrap().theta,
            vec![0.35, 0.37, 0.80, 1.30, 1.38, 0.40]
        );
        assert_eq!(Scenario::preset("S9").unwrap().theta, vec![0.0; 6]);
        assert_eq!(Scenario::preset("S1").unwrap().theta[5], 0.35);
        for s in &presets {
            s.validate().unwrap();
            assert_eq!(s.n, vec![10, 10, 14, 16, 20, 20]);
            assert_eq!(s.gamma, vec![5.0, 3.0, 1.3]);
            assert_eq!(s.sigma, 0.4);
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Scenario::preset("S99"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn toml_round_trip() {
        let mut custom = Scenario::with_theta("custom", vec![0.1, 0.2]);
        custom.sigma = 0.31;
        let all: Vec<Scenario> = std::iter::once(custom).chain(Scenario::presets()).collect();
        let text = scenarios_to_toml(&all).unwrap();
        let mut back = parse_scenarios(&text).unwrap();
        back.sort_by(|a, b| a.name.cmp(&b.name));
        let mut expected = all.clone();
        expected.sort_by(|a, b| a.name.cmp(&b.name));
        assert_eq!(back, expected);
    }

    #[test]
    fn config_defaults_and_validation() {
        let s = parse_scenarios("[X]\ntheta = [0.0, 0.5]\nn = [4, 6]\n").unwrap();
        assert_eq!(s[0].gamma, vec![5.0, 3.0, 1.3]);
        assert!(parse_scenarios("[X]\ntheta = [0.0, 0.5]\nn = [4, 5]\n").is_err());
        assert!(parse_scenarios("[X]\ntheta = [0.0]\nn = [4, 6]\n").is_err());
        assert!(parse_scenarios("not toml [").is_err());
    }
}
