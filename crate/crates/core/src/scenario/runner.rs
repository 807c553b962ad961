use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use log::info;

use super::config::ScenarioConfig;
use super::ScenarioError;
use crate::engine::{RunOutput, Simulation};
use crate::metrics::{write_detectors, write_messages, write_trace, write_vehicles};
use crate::network::RoadNetwork;

pub const CONFIG_FILE: &str = "config.toml";
pub const VEHICLES_FILE: &str = "vehicles.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const DETECTORS_FILE: &str = "detectors.csv";
pub const MESSAGES_FILE: &str = "messages.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Runs one scenario to completion. With `out`, every output file is written
/// into that directory (created if needed).
pub fn run_scenario(config: &ScenarioConfig, out: Option<&Path>) -> Result<RunOutput, ScenarioError> {
    let network = config.network()?;
    let demand = config.demand_spec()?;
    let sim = Simulation::new(network.clone(), &demand, config.simulation_config())?;
    let output = sim.run()?;
    info!(
        "{}: {} arrived, mean delay {:.2} s, {} rerouted",
        config.scenario.name, output.summary.arrived, output.summary.mean_delay_s, output.summary.reroute_count
    );
    if let Some(dir) = out {
        write_outputs(dir, config, &network, &output)?;
    }
    Ok(output)
}

pub fn write_outputs(
    dir: &Path,
    config: &ScenarioConfig,
    network: &RoadNetwork,
    output: &RunOutput,
) -> Result<(), ScenarioError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ScenarioError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(io(&path))
    };
    fs::write(dir.join(CONFIG_FILE), config.to_toml()).map_err(io(&dir.join(CONFIG_FILE)))?;
    write_vehicles(create(VEHICLES_FILE)?, &output.journeys)?;
    if config.output.trace {
        write_trace(create(TRACE_FILE)?, &output.trace, network)?;
    }
    write_detectors(create(DETECTORS_FILE)?, &output.detections)?;
    write_messages(create(MESSAGES_FILE)?, &output.messages)?;
    let summary = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    fs::write(dir.join(SUMMARY_FILE), summary + "\n").map_err(io(&dir.join(SUMMARY_FILE)))?;
    Ok(())
}
