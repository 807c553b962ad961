//! The junction breakdown with and without V2X: informed vehicles detour over
//! the bypass instead of queueing behind the stopped vehicle.
//!
//! ```text
//! cargo run --release --example proactive_rerouting -- [seed]
//! ```

use cvroute::run_scenario;
use cvroute::scenario::{table3_scenario, Group, Role, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(DEFAULT_SEED);
    println!("{:<9} {:>9} {:>9} {:>8} {:>10} {:>12}", "arm", "warnings", "rerouted", "caution", "delay_s", "journey_s");
    for role in [Role::Baseline, Role::Disabled, Role::Enabled] {
        let out = run_scenario(&table3_scenario(Group::Junction, role, seed), None)?;
        let s = &out.summary;
        println!(
            "{:<9} {:>9} {:>9} {:>8} {:>10.2} {:>12.2}",
            role.to_string(),
            s.warnings_emitted,
            s.reroute_count,
            s.caution_count,
            s.mean_delay_s,
            s.mean_journey_time_s
        );
    }
    Ok(())
}
