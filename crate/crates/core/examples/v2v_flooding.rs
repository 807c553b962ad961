//! A breakdown warning flooding down a chain of vehicles 250 m apart with a
//! 300 m radio range: one hop per relay step.
//!
//! ```text
//! cargo run --example v2v_flooding -- [vehicles] [spacing_m]
//! ```

use cvroute::network::EdgeIndex;
use cvroute::traffic::VehicleId;
use cvroute::v2x::{BreakdownLocation, Channel, CommConfig, MessageKind, Payload, Station};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let spacing: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(250.0);
    let stations: Vec<Station> = (0..n)
        .map(|k| Station {
            id: VehicleId(k),
            position: (spacing * f64::from(k), 0.0),
            depart_time: 0.0,
            speed: 0.0,
            accel: 0.0,
        })
        .collect();
    let mut channel = Channel::new(CommConfig::default(), false);
    let payload = Payload::Breakdown(BreakdownLocation {
        vehicle: VehicleId(0),
        edge: EdgeIndex(0),
        pos: 0.0,
    });
    channel.originate(0.0, &stations, VehicleId(0), MessageKind::BreakdownWarning, payload)?;
    for step in 1..=n {
        let handled = channel.relay_step();
        if handled.is_empty() {
            break;
        }
        for (rx, m) in handled {
            println!("relay step {step}: vehicle {rx} handles warning seq {} at hop {}", m.seq, m.hop_count);
        }
        channel.flush_relays(f64::from(step), &stations);
    }
    println!("{} deliveries logged", channel.log().len());
    Ok(())
}
