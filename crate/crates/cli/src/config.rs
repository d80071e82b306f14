//! Run configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use contactopt::bayesopt::GpOptions;
use contactopt::scenarios::{
    Aggregation, BoundQuadratic, CircleLinear, ClampLiteParams, ClampLiteScenario, Quadratic1d, Scenario, WedgeParams,
    WedgeScenario,
};
use contactopt::{CboOptions, NlpOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Wedge,
    ClampLite,
    #[serde(rename = "quadratic-1d")]
    Quadratic1d,
    BoundQuadratic,
    CircleLinear,
}

impl ScenarioId {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Wedge => "wedge",
            ScenarioId::ClampLite => "clamp-lite",
            ScenarioId::Quadratic1d => "quadratic-1d",
            ScenarioId::BoundQuadratic => "bound-quadratic",
            ScenarioId::CircleLinear => "circle-linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Gradient,
    Cbo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::Cbo => "cbo",
        }
    }
}

/// Bayesian optimization settings; `budget` counts evaluations after the
/// feasible seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CboSettings {
    pub budget: usize,
    pub n_initial: usize,
    pub candidates: usize,
    pub xi: f64,
    pub allow_infeasible_start: bool,
    pub gp: GpOptions,
}

impl Default for CboSettings {
    fn default() -> Self {
        let o = CboOptions::default();
        Self {
            budget: 50,
            n_initial: o.n_initial,
            candidates: o.candidates,
            xi: o.xi,
            allow_infeasible_start: o.allow_infeasible_start,
            gp: o.gp,
        }
    }
}

impl CboSettings {
    pub fn options(&self) -> CboOptions {
        CboOptions {
            n_initial: self.n_initial,
            candidates: self.candidates,
            xi: self.xi,
            allow_infeasible_start: self.allow_infeasible_start,
            gp: self.gp.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub method: Method,
    /// Also seeds the optimizer's perturbation retries.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Start design of a gradient run; defaults to the scenario's initial
    /// design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub gradient: NlpOptions,
    #[serde(default)]
    pub cbo: CboSettings,
    #[serde(default)]
    pub wedge: WedgeParams,
    #[serde(default)]
    pub clamp: ClampLiteParams,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl RunConfig {
    pub fn new(scenario: ScenarioId, method: Method) -> Self {
        Self {
            scenario,
            method,
            seed: 0,
            output: None,
            start: None,
            gradient: NlpOptions::default(),
            cbo: CboSettings::default(),
            wedge: WedgeParams::default(),
            clamp: ClampLiteParams::default(),
            aggregation: Aggregation::default(),
        }
    }

    /// Reads TOML, or JSON when the extension is `.json`. A run manifest is
    /// accepted as well and yields the configuration it records.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json).map_err(|message| CliError::Config { path: path.to_path_buf(), message })
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        let cfg = if json {
            let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            if v.get("config").is_some() {
                serde_json::from_value::<Manifest>(v).map_err(|e| e.to_string())?.config
            } else {
                serde_json::from_value(v).map_err(|e| e.to_string())?
            }
        } else {
            let t: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
            if t.contains_key("config") {
                toml::from_str::<Manifest>(text).map_err(|e| e.to_string())?.config
            } else {
                toml::from_str(text).map_err(|e| e.to_string())?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.seed > i64::MAX as u64 {
            return Err(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        if let Some(s) = &self.start {
            if s.iter().any(|v| !v.is_finite()) {
                return Err("start contains a non-finite value".into());
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn build_scenario(&self) -> Result<Box<dyn Scenario>, CliError> {
        Ok(match self.scenario {
            ScenarioId::Wedge => Box::new(WedgeScenario::new(self.wedge.clone())?),
            ScenarioId::ClampLite => Box::new(ClampLiteScenario::new(self.clamp.clone(), self.aggregation)?),
            ScenarioId::Quadratic1d => Box::new(Quadratic1d),
            ScenarioId::BoundQuadratic => Box::new(BoundQuadratic),
            ScenarioId::CircleLinear => Box::new(CircleLinear),
        })
    }
}

/// Version of the CSV layouts written by this build; bumped whenever a
/// column is added, removed or reordered.
pub const CSV_SCHEMA: u32 = 1;

/// Resolved configuration with tool identification, written next to every
/// run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub csv_schema: u32,
    pub seed: u64,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: RunConfig) -> Self {
        Self {
            tool: "contactopt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            csv_schema: CSV_SCHEMA,
            seed: config.seed,
            config,
        }
    }
}
