//! Application configuration file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::EvaluationSettings;
use crate::linksim::{DynamicProtocolConfig, SimulatorConfig};
use crate::phy::{EnvironmentModel, RadioConfig};
use crate::scenarios::ScenarioGrid;
use crate::selector::{RegionProfile, ScoreWeights, SelectorOptions};

pub const DEFAULT_SEED: u64 = 42;

/// Every section is optional; an empty file yields the defaults.
///
/// ```toml
/// seed = 7
///
/// [radio]
/// tx_power = 10.0
///
/// [weights]
/// w_toa = 0.4
///
/// [simulator]
/// n_packets = 2000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    pub radio: RadioConfig,
    /// Environment of scenarios given by command-line flags.
    pub environment: EnvironmentModel,
    pub region: RegionProfile,
    pub weights: ScoreWeights,
    pub selector: SelectorOptions,
    pub simulator: SimulatorConfig,
    pub dynamic: DynamicProtocolConfig,
    /// Axes used by `generate`; the region comes from `region`.
    pub grid: ScenarioGrid,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            radio: RadioConfig::default(),
            environment: EnvironmentModel::default(),
            region: RegionProfile::default(),
            weights: ScoreWeights::default(),
            selector: SelectorOptions::default(),
            simulator: SimulatorConfig::default(),
            dynamic: DynamicProtocolConfig::default(),
            grid: ScenarioGrid::default(),
        }
    }
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut c: Self = toml::from_str(text)?;
        c.finish()?;
        Ok(c)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut c: Self = serde_json::from_str(text)?;
        c.finish()?;
        Ok(c)
    }

    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    fn finish(&mut self) -> Result<()> {
        self.weights = self.weights.normalized()?;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.environment.validate()?;
        self.region.validate()?;
        self.region.check_radio(&self.radio)?;
        self.weights.normalized()?;
        self.selector.validate()?;
        self.simulator.validate()?;
        self.dynamic.validate()?;
        for env in &self.grid.environments {
            env.validate()?;
        }
        Ok(())
    }

    pub fn evaluation_settings(&self) -> EvaluationSettings {
        EvaluationSettings {
            radio: self.radio.clone(),
            weights: self.weights,
            selector: self.selector,
            simulator: self.simulator,
        }
    }

    pub fn scenario_grid(&self) -> ScenarioGrid {
        ScenarioGrid {
            region: self.region.clone(),
            ..self.grid.clone()
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}
