use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::policy::PolicyKind;
use crate::system::{RngSeed, SystemParams};
use crate::trading::ContinuousMarketSpec;

/// Default replication count, sized for a laptop.
pub const DEFAULT_RUNS: u64 = 100;
/// Full-scale replication count; metadata records runs below it.
pub const REFERENCE_RUNS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ScenarioConfig {
    Trading(ContinuousMarketSpec),
    Inline { system: Box<SystemParams> },
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::Trading(ContinuousMarketSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    /// Rounds per run. Falls back to the trading spec's horizon, then 10⁴.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub seed: RngSeed,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub ucb_delta: f64,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write run 0's per-round decisions (and, for the trading
    /// scenario, its buy/sell timeline) for every policy.
    #[serde(default)]
    pub decision_logs: bool,
}

fn default_runs() -> u64 {
    DEFAULT_RUNS
}

fn default_s() -> usize {
    10
}

fn default_lambda() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.1
}

fn default_policies() -> Vec<PolicyKind> {
    PolicyKind::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            horizon: None,
            runs: default_runs(),
            seed: RngSeed::default(),
            s: default_s(),
            lambda: default_lambda(),
            ucb_delta: default_delta(),
            policies: default_policies(),
            output_dir: default_output_dir(),
            decision_logs: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn horizon(&self) -> u64 {
        match (&self.horizon, &self.scenario) {
            (Some(n), _) => *n,
            (None, ScenarioConfig::Trading(spec)) => spec.horizon,
            (None, ScenarioConfig::Inline { .. }) => 10_000,
        }
    }

    /// Checks that need no scenario; `num_actions` is checked against the
    /// exploration length once the scenario is built.
    pub fn validate(&self, num_actions: usize) -> Result<()> {
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if self.s == 0 {
            return Err(invalid("window s must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda must be finite and > 0"));
        }
        if !(self.ucb_delta > 0.0 && self.ucb_delta < 1.0) {
            return Err(invalid("ucb_delta must lie in (0, 1)"));
        }
        if self.policies.is_empty() {
            return Err(invalid("at least one policy is required"));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            return Err(invalid("policies must not repeat"));
        }
        let explore = num_actions as u64 * self.s as u64;
        if self.horizon() <= explore {
            return Err(invalid(format!("horizon {} must exceed k·s = {explore}", self.horizon())));
        }
        Ok(())
    }
}
