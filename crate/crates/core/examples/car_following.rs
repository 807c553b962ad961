//! A passenger car at 60 mph closing on a stationary HGV, stepped with the
//! Krauss model (noise sample fixed at its mean).
//!
//! ```text
//! cargo run --example car_following -- [gap_m]
//! ```

use cvroute::traffic::{krauss_speed, Leader, VehicleClass};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut gap: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(150.0);
    let car = VehicleClass::passenger();
    let dt = 1.0;
    let mut v = car.max_speed;
    println!("{:>4} {:>8} {:>8} {:>8}", "t", "gap_m", "speed", "accel");
    for t in 0..40 {
        let next = krauss_speed(v, &car, car.max_speed, Some(Leader { speed: 0.0, gap }), dt, 0.5)?;
        gap -= next * dt;
        println!("{:>4} {:>8.2} {:>8.2} {:>8.2}", t + 1, gap, next, (next - v) / dt);
        v = next;
        if v < 0.01 {
            break;
        }
    }
    println!("stopped {gap:.2} m behind the leader (min gap {} m)", car.min_gap);
    Ok(())
}
