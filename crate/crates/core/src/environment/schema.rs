//! JSON instance files.
//!
//! ```json
//! { "T": 1000, "B": 5.0,
//!   "arms": [ { "reward": {"support": [0], "probs": [1]},
//!               "drifts": [ {"support": [0, 1], "probs": [0.6, 0.4]} ] } ] }
//! ```
//!
//! Coordinates of one arm are treated as independent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_fixture, EnvError, Environment, Marginal, OutcomeDistribution, FIXTURE_IDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub reward: Marginal,
    pub drifts: Vec<Marginal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(rename = "B")]
    pub initial_budget: f64,
    pub arms: Vec<ArmSpec>,
}

impl InstanceFile {
    pub fn into_environment(self) -> Result<Environment, EnvError> {
        let arms = self
            .arms
            .iter()
            .map(|a| OutcomeDistribution::independent(&a.reward, &a.drifts))
            .collect::<Result<Vec<_>, _>>()?;
        Environment::new(self.horizon, self.initial_budget, arms)
    }
}

pub fn parse_instance(text: &str) -> Result<Environment, serde_json::Error> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.into_environment().map_err(serde::de::Error::custom)
}

pub fn load_instance(path: &Path) -> Result<Environment, EnvError> {
    let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let env = parse_instance(&text).map_err(|source| EnvError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    Ok(match stem {
        Some(s) => env.named(s),
        None => env,
    })
}

/// A fixture id if `source` names one, otherwise a JSON file path.
pub fn resolve_source(source: &str) -> Result<Environment, EnvError> {
    if FIXTURE_IDS.contains(&source) {
        make_fixture(source)
    } else {
        load_instance(Path::new(source))
    }
}
