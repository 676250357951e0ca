//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clips::Io;
use crate::deliberation::DEFAULT_STEP_CAP;
use crate::env::maintenance::BiasCutoffs;
use crate::error::{Error, Result};
use crate::learning::LearningParams;
use crate::probability::ProbabilityRule;
use crate::table::BiasKind;

pub const DEFAULT_ENSEMBLE: usize = 50;
/// Safety limit on one maintenance episode. Shaping, not this cap, is what ends a stuck
/// search: a cap below `a_max` would freeze a greedy agent on its least-bad wrong answer.
pub const DEFAULT_EPISODE_STEP_CAP: u64 = 10_000;

pub const INDUCTIVE_A_MAX: u64 = 500;
pub const FULL_A_MAX: u64 = 1000;

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE
}

fn default_walk_step_cap() -> usize {
    DEFAULT_STEP_CAP
}

fn default_episode_step_cap() -> u64 {
    DEFAULT_EPISODE_STEP_CAP
}

fn one() -> f64 {
    1.0
}

fn ff() -> BiasKind {
    BiasKind::FF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub environment: EnvironmentSpec,
    pub agents: Vec<AgentSpec>,
    /// Rounds of an invasion game, or maintenance episodes.
    pub rounds: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rounds (or episodes) per CSV row. Defaults to 100 for invasion games and 1 for maintenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default = "default_walk_step_cap")]
    pub walk_step_cap: usize,
    #[serde(default)]
    pub assert_bounds: bool,
    /// History and walk logs of ensemble member 0.
    #[serde(default)]
    pub record_history: bool,
    #[serde(default)]
    pub record_walks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Distraction,
    Deceptive,
    Maintenance {
        #[serde(default = "default_episode_step_cap")]
        step_cap: u64,
        /// Scenario file; the shipped set when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scenarios: Option<PathBuf>,
    },
}

impl EnvironmentSpec {
    pub fn is_maintenance(&self) -> bool {
        matches!(self, EnvironmentSpec::Maintenance { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Meps(MepsSpec),
    #[serde(rename = "q")]
    QLearning(QSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MepsSpec {
    pub name: String,
    #[serde(default = "ff")]
    pub bias: BiasKind,
    /// IO set of an invasion-game agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io: Option<Vec<Io>>,
    /// Category cutoffs of a maintenance agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<BiasCutoffs>,
    /// Every step reads the whole configuration (the unrestricted agent).
    #[serde(default)]
    pub full_configuration: bool,
    pub rule: ProbabilityRule,
    #[serde(default = "one")]
    pub h_init: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSpec {
    pub name: String,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(default)]
    pub q_init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_max: Option<u64>,
}

impl AgentSpec {
    pub fn name(&self) -> &str {
        match self {
            AgentSpec::Meps(m) => &m.name,
            AgentSpec::QLearning(spec) => &spec.name,
        }
    }

    /// Steps before reward shaping starts to bite.
    pub fn a_max(&self) -> u64 {
        match self {
            AgentSpec::Meps(m) => m.a_max.unwrap_or(if m.full_configuration { FULL_A_MAX } else { INDUCTIVE_A_MAX }),
            AgentSpec::QLearning(spec) => spec.a_max.unwrap_or(FULL_A_MAX),
        }
    }
}

impl MepsSpec {
    pub fn params(&self) -> LearningParams {
        LearningParams { gamma: self.gamma, eta: self.eta }
    }
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(json).map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = ExperimentConfig::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        // Scenario paths are relative to the config file.
        if let EnvironmentSpec::Maintenance { scenarios: Some(p), .. } = &mut config.environment {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(config)
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or(if self.environment.is_maintenance() { 1 } else { 100 })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.ensemble == 0 {
            return bad("ensemble", "must be at least 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds", "must be at least 1".into());
        }
        let w = self.window();
        if w == 0 || self.rounds % w != 0 {
            return bad("window", format!("{w} must be positive and divide rounds = {}", self.rounds));
        }
        if self.walk_step_cap == 0 {
            return bad("walk_step_cap", "must be at least 1".into());
        }
        if let EnvironmentSpec::Maintenance { step_cap: 0, .. } = self.environment {
            return bad("environment.step_cap", "must be at least 1".into());
        }
        if self.agents.is_empty() {
            return bad("agents", "list is empty".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for (k, agent) in self.agents.iter().enumerate() {
            let at = |f: &str| format!("agents[{k}].{f}");
            if agent.name().is_empty() || agent.name().contains(['/', '\\']) || !names.insert(agent.name()) {
                return bad(&at("name"), format!("{:?} must be a unique plain file name", agent.name()));
            }
            match agent {
                AgentSpec::Meps(m) => {
                    m.rule.validate().map_err(|e| Error::Config(format!("{}: {e}", at("rule"))))?;
                    m.params().validate().map_err(|e| Error::Config(format!("{}: {e}", at("gamma/eta"))))?;
                    if !m.h_init.is_finite() {
                        return bad(&at("h_init"), "must be finite".into());
                    }
                    match (&self.environment, &m.io, &m.cutoffs) {
                        (EnvironmentSpec::Maintenance { .. }, None, Some(_)) => {}
                        (EnvironmentSpec::Maintenance { .. }, _, _) => {
                            return bad(&at("cutoffs"), "maintenance agents need cutoffs and no io".into())
                        }
                        (_, Some(io), None) if !io.is_empty() => {}
                        _ => return bad(&at("io"), "invasion-game agents need a nonempty io and no cutoffs".into()),
                    }
                    if self.environment.is_maintenance() && m.bias != BiasKind::DP {
                        return bad(&at("bias"), "maintenance agents discard passive excitations (DP)".into());
                    }
                }
                AgentSpec::QLearning(spec) => {
                    for (field, value) in [("alpha", spec.alpha), ("lambda", spec.lambda)] {
                        if !(0.0..=1.0).contains(&value) {
                            return bad(&at(field), format!("must lie in [0, 1], got {value}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISTRACTION: &str = r#"{
        "name": "d", "environment": {"kind": "distraction"}, "rounds": 200,
        "agents": [{"kind": "meps", "name": "two", "io": [[2, 1]], "rule": {"softmax": {"beta": 1.0}}},
                   {"kind": "q", "name": "q", "alpha": 1.0, "lambda": 0.0}]
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(DISTRACTION).unwrap();
        assert_eq!(c.ensemble, 50);
        assert_eq!(c.window(), 100);
        assert_eq!(c.walk_step_cap, 1000);
        let AgentSpec::Meps(m) = &c.agents[0] else { panic!() };
        assert_eq!((m.bias, m.h_init, m.gamma, m.eta), (BiasKind::FF, 1.0, 0.0, 1.0));
        assert_eq!(c.agents[1].a_max(), 1000);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (DISTRACTION.replace("\"rounds\": 200", "\"rounds\": 150"), "window"),
            (DISTRACTION.replace("[[2, 1]]", "[]"), "agents[0].io"),
            (DISTRACTION.replace("\"alpha\": 1.0", "\"alpha\": 2.0"), "agents[1].alpha"),
            (DISTRACTION.replace("\"name\": \"q\"", "\"name\": \"two\""), "agents[1].name"),
            (DISTRACTION.replace("\"rounds\"", "\"ensemble\": 0, \"rounds\""), "ensemble"),
            (DISTRACTION.replace("\"beta\": 1.0", "\"beta\": 1.0, \"x\": 1"), "config"),
            (DISTRACTION.replace("\"rounds\"", "\"round_count\": 3, \"rounds\""), "round_count"),
        ];
        for (json, field) in cases {
            let err = ExperimentConfig::from_json(&json).unwrap_err().to_string();
            assert!(err.contains(field), "{err} lacks {field}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(DISTRACTION).unwrap();
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.seed = 1;
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(ExperimentConfig::from_json(&a.canonical_json()).unwrap(), a);
    }
}
