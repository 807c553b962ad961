//! Discrete-time microscopic traffic kernel.

pub mod class;
pub mod demand;
pub mod krauss;
pub mod lane_change;
mod world;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use class::{VehicleClass, VehicleKind, MAX_SPEED_60_MPH};
pub use demand::{DemandEntry, DemandError, DemandGenerator, DemandSpec};
pub use krauss::{krauss_speed, krauss_step, safe_speed, KraussError, Leader};
pub use lane_change::{lane_change_decide, AdjacentLane, Changer, LaneDecision, RearVehicle};
pub use world::{
    CautionZone, Movement, Placement, Segment, StepOutcome, TrafficSettings, Vehicle, World,
    WorldError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriveMode {
    Normal,
    BrokenDown,
    Caution,
}
