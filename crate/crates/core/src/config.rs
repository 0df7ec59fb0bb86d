//! TOML run configuration and the reproducibility manifest.
//!
//! Sections: `[dynamics]`, `[geometry]`, `[speeds]`, `[signal]` hold the
//! model parameters; `[scenario]`, `[controller]`, `[sim]` and `[sweep]`
//! describe the run. A manifest is a fully resolved config plus the
//! `tool_version` that wrote it, so it can be fed back as `--config`.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::controllers::{ControllerKind, ControllerSpec};
use crate::experiments::{self, ExperimentError, ScenarioSpec, SweepSpec};
use crate::model::{Geometry, ModelParams, SignalTiming, SpeedLimits, VehicleDynamics, Violations};
use crate::sim::{InitialState, QueueId, SimConfig};
use crate::tolerances::{DEFAULT_M2, DEFAULT_R_VALUES, DEFAULT_SEEDS};
use crate::ValidParams64;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Params(#[from] Violations),
    #[error(transparent)]
    Scenario(#[from] ExperimentError),
}

/// Initial placement used by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Randomized two-queue traffic (`m2`, `d1`, `d2`, `r`).
    #[default]
    Random,
    /// One car cruising at `V_max` in queue 1, just upstream of the zone.
    SingleCar,
    /// `batches·N` stopped cars in each queue.
    Saturated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_m2")]
    pub m2: usize,
    #[serde(default = "default_d1")]
    pub d1: f64,
    #[serde(default = "default_d2")]
    pub d2: f64,
    /// `M1/M2` for a single random run.
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_m2() -> usize {
    DEFAULT_M2
}
fn default_d1() -> f64 {
    4.0
}
fn default_d2() -> f64 {
    40.0
}
fn one() -> f64 {
    1.0
}
fn default_batches() -> usize {
    4
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            layout: Layout::Random,
            m2: DEFAULT_M2,
            d1: default_d1(),
            d2: default_d2(),
            r: 1.0,
            batches: default_batches(),
        }
    }
}

impl ScenarioSection {
    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            m2: self.m2,
            d1: self.d1,
            d2: self.d2,
        }
    }

    pub fn initial_state(&self, params: &ValidParams64, seed: u64) -> Result<InitialState, ExperimentError> {
        Ok(match self.layout {
            Layout::Random => {
                if !(self.r >= 0.0 && self.r <= 1.0) {
                    return Err(ExperimentError::Ratio(self.r));
                }
                let spec = self.spec();
                experiments::generate_scenario(params, spec.m1_for(self.r), spec.m2, spec.d1, spec.d2, seed)?
                    .initial
            }
            Layout::SingleCar => InitialState::single_cruiser(params, QueueId::One, 10.0),
            Layout::Saturated => InitialState::saturated(params, self.batches),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "all_kinds")]
    pub controllers: Vec<ControllerKind>,
    #[serde(default = "default_r_values")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub base_seed: u64,
}

fn all_kinds() -> Vec<ControllerKind> {
    ControllerKind::ALL.to_vec()
}
fn default_r_values() -> Vec<f64> {
    DEFAULT_R_VALUES.to_vec()
}
fn default_seeds() -> u64 {
    DEFAULT_SEEDS
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            controllers: all_kinds(),
            r_values: default_r_values(),
            seeds: DEFAULT_SEEDS,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Set in manifests only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    #[serde(default = "baseline_dynamics")]
    pub dynamics: VehicleDynamics<f64>,
    #[serde(default = "baseline_geometry")]
    pub geometry: Geometry<f64>,
    #[serde(default = "baseline_speeds")]
    pub speeds: SpeedLimits<f64>,
    #[serde(default = "baseline_signal")]
    pub signal: SignalTiming<f64>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default = "default_controller")]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn baseline_dynamics() -> VehicleDynamics<f64> {
    ModelParams::baseline().dynamics
}
fn baseline_geometry() -> Geometry<f64> {
    ModelParams::baseline().geometry
}
fn baseline_speeds() -> SpeedLimits<f64> {
    ModelParams::baseline().speeds
}
fn baseline_signal() -> SignalTiming<f64> {
    ModelParams::baseline().signal
}

fn default_controller() -> ControllerSpec {
    ControllerSpec::new(ControllerKind::AdaptiveDeadline)
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::baseline();
        Self {
            tool_version: None,
            dynamics: p.dynamics,
            geometry: p.geometry,
            speeds: p.speeds,
            signal: p.signal,
            scenario: ScenarioSection::default(),
            controller: default_controller(),
            sim: SimConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> ModelParams<f64> {
        ModelParams {
            dynamics: self.dynamics,
            geometry: self.geometry,
            speeds: self.speeds,
            signal: self.signal,
        }
    }

    pub fn validated_params(&self) -> Result<ValidParams64, Violations> {
        self.params().validate()
    }

    /// The same config stamped with the current tool version.
    pub fn manifest(&self) -> String {
        let stamped = Self {
            tool_version: Some(TOOL_VERSION.to_string()),
            ..self.clone()
        };
        stamped.to_toml()
    }

    /// Sweep grid using the `[controller]` settings for every listed kind.
    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            controllers: self
                .sweep
                .controllers
                .iter()
                .map(|&kind| ControllerSpec {
                    kind,
                    ..self.controller.clone()
                })
                .collect(),
            r_values: self.sweep.r_values.clone(),
            seeds: self.sweep.seeds,
            base_seed: self.sweep.base_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_baseline() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.params(), ModelParams::baseline());
    }

    #[test]
    fn parse_emit_parse_round_trip() {
        let mut c = RunConfig::default();
        c.speeds.v_safe = 5.5;
        c.controller.margin = 0.25;
        c.controller.deadline = Some(40.0);
        c.sweep.r_values = vec![0.5, 1.0];
        c.scenario.layout = Layout::Saturated;
        let text = c.to_toml();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn manifest_parses_as_config() {
        let c = RunConfig::default();
        let m = RunConfig::parse(&c.manifest()).unwrap();
        assert_eq!(m.tool_version.as_deref(), Some(TOOL_VERSION));
        assert_eq!(RunConfig { tool_version: None, ..m }, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[geometry]\ncar_lenght = 4.0\n").is_err());
        assert!(RunConfig::parse("[bogus]\nx = 1\n").is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let c = RunConfig::parse("[speeds]\nv_max = 13.3\nv_safe = 20.0\n").unwrap();
        assert_eq!(c.speeds.v_safe, 20.0);
        assert_eq!(c.geometry, ModelParams::baseline().geometry);
        let v = c.validated_params().unwrap_err();
        assert!(v.to_string().contains("V_S ≤ V_max"));
    }

    #[test]
    fn partial_model_section_is_rejected() {
        assert!(RunConfig::parse("[speeds]\nv_max = 13.3\n").is_err());
    }

    #[test]
    fn sweep_spec_shares_controller_settings() {
        let mut c = RunConfig::default();
        c.controller.margin = 0.5;
        let s = c.sweep_spec();
        assert_eq!(s.controllers.len(), 3);
        assert!(s.controllers.iter().all(|k| k.margin == 0.5));
    }
}
