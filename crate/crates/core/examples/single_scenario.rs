//! Loads a scenario file, runs it and writes its output files.
//!
//! ```text
//! cargo run --release --example single_scenario -- [scenario.toml] [out_dir]
//! ```

use std::path::PathBuf;

use cvroute::{load_scenario, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/exp3_junction_enabled.toml"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/single"));
    let config = load_scenario(&path)?;
    let output = run_scenario(&config, Some(&out))?;
    let s = &output.summary;
    println!("{}: {} steps, {}/{} arrived", s.scenario, s.steps, s.arrived, s.demand);
    println!("mean delay {:.2} s (max {:.2} s), {} rerouted", s.mean_delay_s, s.max_delay_s, s.reroute_count);
    println!("deceleration mean {:.4} m/s^2, variance {:.4}", s.decel.mean, s.decel.variance);
    for (id, n) in &s.detector_counts {
        println!("detector {id}: {n} vehicles");
    }
    println!("outputs in {}", out.display());
    Ok(())
}
