//! Scenario files (TOML).
//!
//! ```toml
//! [scenario]
//! name = "junction-enabled"
//! network = "builtin:junction"   # or a network file, relative to this file
//! end_time_s = 3000
//! dt_s = 1                       # default 1
//! seed = 7                       # default 0
//! stall_threshold_s = 300        # default 300
//!
//! [demand]                       # either `file = "..."` or a generator
//! total = 400
//! passenger_fraction = 0.8
//! depart_start_s = 0
//! depart_end_s = 1000
//! origin = "S"
//! destination = "E"
//!
//! [comm]                         # all optional
//! beacon_interval_s = 1
//! range_m = 300
//!
//! [breakdown]                    # optional
//! target = 0
//! count = 1
//! start_s = 115
//! duration_s = 300
//!
//! [rerouting]
//! enabled = true
//! override = "blocked"           # or a travel time in seconds
//! caution_factor = 0.5
//!
//! [output]
//! trace = true
//! log_beacons = false
//! profile_vehicles = [13, 19]
//!
//! [[detectors]]
//! id = "C"
//! edge = "S_J1"
//! pos_m = 2200
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::builtin::builtin_network;
use super::ScenarioError;
use crate::engine::SimulationConfig;
use crate::incident::BreakdownSchedule;
use crate::metrics::DetectorSpec;
use crate::network::RoadNetwork;
use crate::rerouting::ReroutingConfig;
use crate::traffic::{DemandGenerator, DemandSpec, VehicleId};
use crate::v2x::CommConfig;

pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub network: String,
    pub end_time_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stall")]
    pub stall_threshold_s: f64,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_dt() -> f64 {
    1.0
}

fn default_stall() -> f64 {
    300.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passenger_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depart_start_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depart_end_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
}

impl DemandConfig {
    pub fn generator(gen: &DemandGenerator) -> Self {
        Self {
            file: None,
            total: Some(gen.total),
            passenger_fraction: Some(gen.passenger_fraction),
            depart_start_s: Some(gen.depart_start_s),
            depart_end_s: Some(gen.depart_end_s),
            origin: Some(gen.origin.clone()),
            destination: Some(gen.destination.clone()),
        }
    }

    fn as_generator(&self) -> Result<DemandGenerator, ScenarioError> {
        let missing = |key: &str| ScenarioError::Invalid {
            key: format!("demand.{key}"),
            message: "required when demand.file is absent".into(),
        };
        Ok(DemandGenerator {
            total: self.total.ok_or_else(|| missing("total"))?,
            passenger_fraction: self.passenger_fraction.unwrap_or(0.8),
            depart_start_s: self.depart_start_s.unwrap_or(0.0),
            depart_end_s: self.depart_end_s.ok_or_else(|| missing("depart_end_s"))?,
            origin: self.origin.clone().ok_or_else(|| missing("origin"))?,
            destination: self.destination.clone().ok_or_else(|| missing("destination"))?,
        })
    }

    /// Fills generator defaults so the echoed config is explicit.
    fn materialize(&mut self) {
        if self.file.is_none() {
            self.passenger_fraction.get_or_insert(0.8);
            self.depart_start_s.get_or_insert(0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trace: bool,
    pub log_beacons: bool,
    pub profile_vehicles: Vec<VehicleId>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trace: true,
            log_beacons: false,
            profile_vehicles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub demand: DemandConfig,
    #[serde(default)]
    pub comm: CommConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<BreakdownSchedule>,
    #[serde(default)]
    pub rerouting: ReroutingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<DetectorSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = ScenarioConfig::parse(&text).map_err(|e| e.in_file(path))?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.check_files()?;
    Ok(config)
}

impl ScenarioConfig {
    /// Parses and validates scenario text. Relative paths resolve against
    /// the current directory until `base_dir` is set.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut config: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Toml {
            path: None,
            message: e.to_string(),
        })?;
        config.demand.materialize();
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |key: &str, message: &str| {
            Err(ScenarioError::Invalid {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        let s = &self.scenario;
        if !(s.end_time_s > 0.0 && s.end_time_s.is_finite()) {
            return invalid("scenario.end_time_s", "must be > 0");
        }
        if !(s.dt_s > 0.0 && s.dt_s.is_finite()) {
            return invalid("scenario.dt_s", "must be > 0");
        }
        if !(s.stall_threshold_s >= 0.0) {
            return invalid("scenario.stall_threshold_s", "must be >= 0");
        }
        if let Some(name) = s.network.strip_prefix(BUILTIN_PREFIX) {
            if builtin_network(name).is_none() {
                return invalid("scenario.network", &format!("unknown built-in network {name:?}"));
            }
        }
        if self.demand.file.is_none() {
            self.demand.as_generator()?;
        } else if self.demand.total.is_some() || self.demand.origin.is_some() {
            return invalid("demand", "give either file or generator fields, not both");
        }
        self.comm.validate().map_err(|e| ScenarioError::Invalid {
            key: "comm".into(),
            message: e.to_string(),
        })?;
        if let Some(b) = &self.breakdown {
            b.validate().map_err(|e| ScenarioError::Invalid {
                key: "breakdown".into(),
                message: e.to_string(),
            })?;
        }
        self.rerouting.validate().map_err(|e| ScenarioError::Invalid {
            key: "rerouting".into(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    fn resolve(&self, file: &str) -> PathBuf {
        self.base_dir.join(file)
    }

    fn check_files(&self) -> Result<(), ScenarioError> {
        let mut files = Vec::new();
        if !self.scenario.network.starts_with(BUILTIN_PREFIX) {
            files.push(("scenario.network", &self.scenario.network));
        }
        if let Some(f) = &self.demand.file {
            files.push(("demand.file", f));
        }
        for (key, f) in files {
            if !self.resolve(f).is_file() {
                return Err(ScenarioError::Invalid {
                    key: key.into(),
                    message: format!("file {} does not exist", self.resolve(f).display()),
                });
            }
        }
        Ok(())
    }

    pub fn network(&self) -> Result<RoadNetwork, ScenarioError> {
        if let Some(name) = self.scenario.network.strip_prefix(BUILTIN_PREFIX) {
            return builtin_network(name).ok_or_else(|| ScenarioError::Invalid {
                key: "scenario.network".into(),
                message: format!("unknown built-in network {name:?}"),
            });
        }
        let path = self.resolve(&self.scenario.network);
        let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
            path: path.clone(),
            source,
        })?;
        RoadNetwork::parse(&text).map_err(|source| ScenarioError::Network { path, source })
    }

    pub fn demand_spec(&self) -> Result<DemandSpec, ScenarioError> {
        match &self.demand.file {
            Some(f) => {
                let path = self.resolve(f);
                let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                    path: path.clone(),
                    source,
                })?;
                DemandSpec::parse(&text).map_err(|source| ScenarioError::Demand {
                    path: Some(path),
                    source,
                })
            }
            None => self
                .demand
                .as_generator()?
                .generate(self.scenario.seed)
                .map_err(|source| ScenarioError::Demand { path: None, source }),
        }
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        SimulationConfig {
            name: self.scenario.name.clone(),
            seed: self.scenario.seed,
            dt: self.scenario.dt_s,
            end_time: self.scenario.end_time_s,
            stall_threshold: self.scenario.stall_threshold_s,
            comm: self.comm.clone(),
            breakdown: self.breakdown.clone(),
            rerouting: self.rerouting.clone(),
            trace: self.output.trace,
            log_beacons: self.output.log_beacons,
            profile_vehicles: self.output.profile_vehicles.clone(),
            detectors: self
                .detectors
                .iter()
                .map(|d| (d.id.clone(), d.edge.clone(), d.pos_m))
                .collect(),
        }
    }

    /// The fully materialized configuration, as written next to run outputs.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }
}
