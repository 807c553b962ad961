//! Recomputes the headline KPIs of a finished run from its CSV files alone,
//! the way downstream analysis tools consume them, and checks them against
//! summary.json.
//!
//! ```text
//! cargo run --release --example single_scenario -- scenarios/exp2_junction_disabled.toml out/exp2
//! cargo run --example kpi_from_csv -- out/exp2
//! ```

use std::fs::File;
use std::path::PathBuf;

use cvroute::metrics::{decel_stats, Table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).ok_or("usage: kpi_from_csv <run_dir>")?;
    let vehicles = Table::read(File::open(dir.join("vehicles.csv"))?)?;
    let delay: Vec<f64> = vehicles.column("delay")?;
    let journey: Vec<f64> = vehicles.column("journey_time")?;
    let n = delay.len() as f64;
    let mean_delay = delay.iter().sum::<f64>() / n;
    let mean_journey = journey.iter().sum::<f64>() / n;

    let trace = Table::read(File::open(dir.join("trace.csv"))?)?;
    let decel = decel_stats(trace.column::<f64>("accel")?);

    let summary: serde_json::Value = serde_json::from_reader(File::open(dir.join("summary.json"))?)?;
    println!("{} vehicles", vehicles.len());
    println!("mean delay   {mean_delay:.3} s   (summary {})", summary["mean_delay_s"]);
    println!("mean journey {mean_journey:.3} s   (summary {})", summary["mean_journey_time_s"]);
    println!(
        "decel mean {:.4}, variance {:.4} over {} samples (summary {} / {})",
        decel.mean, decel.variance, decel.sample_count, summary["decel"]["mean"], summary["decel"]["variance"]
    );
    let same = summary["decel"]["mean"].as_f64() == Some(decel.mean)
        && summary["decel"]["variance"].as_f64() == Some(decel.variance);
    println!("deceleration matches summary exactly: {same}");
    Ok(())
}
