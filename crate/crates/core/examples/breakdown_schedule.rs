//! A repeating breakdown on a lone vehicle: two stops of 50 s, 200 s apart,
//! the first 100 s into the run.
//!
//! ```text
//! cargo run --example breakdown_schedule -- [count] [start_s] [duration_s] [interval_s]
//! ```

use cvroute::incident::BreakdownSchedule;
use cvroute::traffic::{DemandEntry, DemandSpec, VehicleId, VehicleKind};
use cvroute::{RoadNetwork, Simulation, SimulationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
    let schedule = BreakdownSchedule::new(VehicleId(0), arg(0, 2.0) as u32, arg(1, 100.0), arg(2, 50.0), arg(3, 200.0));

    let network = RoadNetwork::parse("NODE A 0 0\nNODE B 50000 0\nEDGE AB A B 50000 26.8224 1\n")?;
    let demand = DemandSpec::new(vec![DemandEntry {
        id: VehicleId(0),
        kind: VehicleKind::Passenger,
        depart: 0.0,
        origin: "A".into(),
        destination: "B".into(),
    }])?;
    let config = SimulationConfig {
        name: "breakdown".into(),
        end_time: 1200.0,
        breakdown: Some(schedule),
        ..SimulationConfig::default()
    };
    let mut sim = Simulation::new(network, &demand, config)?;
    let mut seen = 0;
    while !sim.is_finished() {
        sim.step()?;
        let events = &sim.incident().expect("scheduled").events;
        for e in &events[seen..] {
            let v = sim.world().vehicle(VehicleId(0)).expect("on the road");
            println!("t={:>6.1} {:?}: vehicle 0 at {:.1} m, {:?}", e.t, e.kind, v.pos, v.mode);
        }
        seen = events.len();
    }
    Ok(())
}
