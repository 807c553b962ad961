//! Deterministic microscopic traffic and V2V co-simulation of vehicle
//! breakdowns, warning dissemination and proactive rerouting of connected
//! vehicles.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: road graph, travel-time overrides, shortest paths
//! - [`traffic`]: vehicle classes, demand, Krauss car-following, lane
//!   changes and the kinematic world
//! - [`v2x`]: range-gated broadcast, beacons and warning flooding
//! - [`incident`]: breakdown schedules
//! - [`rerouting`]: reaction of informed vehicles to warnings
//! - [`metrics`]: journey records, traces, detectors and CSV files
//! - [`engine`]: the step loop
//! - [`scenario`]: configuration files, built-in networks, runs and
//!   experiment matrices

pub mod engine;
pub mod incident;
pub mod metrics;
pub mod network;
pub mod rerouting;
pub mod rng;
pub mod scenario;
pub mod traffic;
pub mod v2x;

pub use engine::{EngineError, RunOutput, Simulation, SimulationConfig};
pub use network::{RoadNetwork, Route, TravelTimeOverride};
pub use scenario::{load_scenario, run_matrix, run_scenario, ExperimentMatrix, ScenarioConfig, ScenarioError};
