//! Declarative scenario suites: named evidence sets with expected posteriors
//! and, optionally, an expected recommendation.
//!
//! ```toml
//! [[scenario]]
//! name = "late growth after warm fall"
//! evidence = "scenarios/warm.ev"        # relative to the suite file
//! recommendation = "treat"              # optional
//!
//! [[scenario.expect]]
//! variable = "Phytophthora"
//! level = "present"
//! probability = 0.4213
//! tolerance = 1e-3                      # optional
//! ```
//!
//! Assignments may also be given inline as `observe = { Var = "level" }`;
//! they are merged over the evidence file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{recommend, DecisionError};
use crate::inference::{posterior, InferenceError, Query};
use crate::model::{Evidence, Network};
use crate::netlang::{parse_evidence_named, ParseDiagnostic};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed suite `{path}`: {message}")]
    Format { path: PathBuf, message: String },
    #[error("scenario `{scenario}`: evidence does not match the network")]
    Evidence { scenario: String, diagnostics: Vec<ParseDiagnostic> },
    #[error("scenario `{scenario}`: {message}")]
    Reference { scenario: String, message: String },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub variable: String,
    pub level: String,
    pub probability: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    evidence: Option<PathBuf>,
    #[serde(default)]
    observe: BTreeMap<String, String>,
    #[serde(default)]
    recommendation: Option<String>,
    #[serde(default)]
    expect: Vec<Expectation>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    #[serde(default)]
    scenario: Vec<RawScenario>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub evidence: Evidence,
    pub recommendation: Option<String>,
    pub expect: Vec<Expectation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSuite {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSuite {
    /// Reads a suite and checks every referenced variable and level
    /// against `net`.
    pub fn load(path: &Path, net: &Network) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, net).map_err(|e| match e {
            ScenarioError::Format { message, .. } => ScenarioError::Format { path: path.to_path_buf(), message },
            other => other,
        })
    }

    /// Parses suite text, resolving evidence paths against `base`.
    pub fn from_toml(text: &str, base: &Path, net: &Network) -> Result<Self, ScenarioError> {
        let raw: RawSuite =
            toml::from_str(text).map_err(|e| ScenarioError::Format { path: PathBuf::new(), message: e.to_string() })?;
        let scenarios = raw.scenario.into_iter().map(|s| resolve(s, base, net)).collect::<Result<_, _>>()?;
        Ok(Self { scenarios })
    }
}

fn resolve(raw: RawScenario, base: &Path, net: &Network) -> Result<Scenario, ScenarioError> {
    let name = raw.name;
    let reference = |message: String| ScenarioError::Reference { scenario: name.clone(), message };
    let mut evidence = match &raw.evidence {
        Some(rel) => {
            let path = base.join(rel);
            let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
            parse_evidence_named(&text, net, &path.display().to_string())
                .map_err(|diagnostics| ScenarioError::Evidence { scenario: name.clone(), diagnostics })?
        }
        None => Evidence::new(),
    };
    for (var, level) in &raw.observe {
        evidence.set(var.clone(), level.clone());
    }
    evidence.resolve(net).map_err(|e| reference(e.to_string()))?;
    for e in &raw.expect {
        let node = net.node(&e.variable).ok_or_else(|| reference(format!("unknown variable `{}`", e.variable)))?;
        if node.variable.level_index(&e.level).is_none() {
            return Err(reference(format!("`{}` has no level `{}`", e.variable, e.level)));
        }
        if !(0.0..=1.0).contains(&e.probability) || e.tolerance.is_nan() || e.tolerance < 0.0 {
            return Err(reference(format!("bad expectation for `{}={}`", e.variable, e.level)));
        }
    }
    if let Some(rec) = &raw.recommendation {
        let decision = crate::decision::decision_node(net).map_err(|e| reference(e.to_string()))?;
        if decision.variable.level_index(rec).is_none() {
            return Err(reference(format!("`{}` has no alternative `{rec}`", decision.name())));
        }
    }
    Ok(Scenario { name, description: raw.description, evidence, recommendation: raw.recommendation, expect: raw.expect })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub variable: String,
    pub level: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub expected_recommendation: Option<String>,
    pub recommendation: Option<String>,
    /// Engine failure, if the scenario could not be evaluated.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub passed: usize,
    pub failed: usize,
    pub scenarios: Vec<ScenarioResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn evaluate(net: &Network, scenario: &Scenario) -> Result<(Vec<CheckResult>, Option<String>), String> {
    let mut checks = Vec::with_capacity(scenario.expect.len());
    for e in &scenario.expect {
        let dist = posterior(net, &Query::single(e.variable.clone(), scenario.evidence.clone()))
            .map_err(|err: InferenceError| err.to_string())?;
        let actual = dist.prob_of(&e.variable, &e.level).unwrap_or(f64::NAN);
        checks.push(CheckResult {
            variable: e.variable.clone(),
            level: e.level.clone(),
            expected: e.probability,
            actual,
            tolerance: e.tolerance,
            passed: (actual - e.probability).abs() <= e.tolerance,
        });
    }
    let recommendation = match &scenario.recommendation {
        Some(_) => Some(
            recommend(net, &scenario.evidence).map_err(|err: DecisionError| err.to_string())?.recommended,
        ),
        None => None,
    };
    Ok((checks, recommendation))
}

pub fn run_suite(net: &Network, suite: &ScenarioSuite) -> SuiteReport {
    let scenarios: Vec<ScenarioResult> = suite
        .scenarios
        .iter()
        .map(|s| match evaluate(net, s) {
            Ok((checks, recommendation)) => ScenarioResult {
                name: s.name.clone(),
                passed: checks.iter().all(|c| c.passed) && recommendation == s.recommendation,
                checks,
                expected_recommendation: s.recommendation.clone(),
                recommendation,
                error: None,
            },
            Err(error) => ScenarioResult {
                name: s.name.clone(),
                passed: false,
                checks: Vec::new(),
                expected_recommendation: s.recommendation.clone(),
                recommendation: None,
                error: Some(error),
            },
        })
        .collect();
    let passed = scenarios.iter().filter(|s| s.passed).count();
    SuiteReport { passed, failed: scenarios.len() - passed, scenarios }
}
