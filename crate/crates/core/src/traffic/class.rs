use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// 60 mph in m/s; network-wide speed ceiling.
pub const MAX_SPEED_60_MPH: f64 = 26.8224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VehicleKind {
    Passenger,
    Hgv,
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleKind::Passenger => "PASSENGER",
            VehicleKind::Hgv => "HGV",
        })
    }
}

impl FromStr for VehicleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PASSENGER" => Ok(VehicleKind::Passenger),
            "HGV" => Ok(VehicleKind::Hgv),
            other => Err(format!("unknown vehicle class '{other}' (expected PASSENGER or HGV)")),
        }
    }
}

/// Kinematic and driver parameters shared by every vehicle of one kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleClass {
    pub kind: VehicleKind,
    /// m/s^2
    pub max_accel: f64,
    /// m/s^2, positive magnitude
    pub max_decel: f64,
    /// m/s
    pub max_speed: f64,
    /// m
    pub min_gap: f64,
    /// driver imperfection in [0, 1]
    pub sigma: f64,
    /// m
    pub length: f64,
}

impl VehicleClass {
    pub fn passenger() -> Self {
        Self {
            kind: VehicleKind::Passenger,
            max_accel: 2.6,
            max_decel: 4.5,
            max_speed: MAX_SPEED_60_MPH,
            min_gap: 2.5,
            sigma: 0.6,
            length: 5.0,
        }
    }

    pub fn hgv() -> Self {
        Self {
            kind: VehicleKind::Hgv,
            sigma: 0.4,
            length: 7.1,
            ..Self::passenger()
        }
    }

    pub fn for_kind(kind: VehicleKind) -> Self {
        match kind {
            VehicleKind::Passenger => Self::passenger(),
            VehicleKind::Hgv => Self::hgv(),
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.max_accel, self.max_decel, self.max_speed, self.min_gap, self.length]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && (0.0..=1.0).contains(&self.sigma)
    }
}
