//! Reaction to breakdown messages: override the affected edge in the
//! vehicle's private view, replan from the next node, or slow down when no
//! detour exists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{RoadNetwork, TravelTimeOverride};
use crate::traffic::{CautionZone, DriveMode, Vehicle};
use crate::v2x::BreakdownLocation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReroutingError {
    #[error("rerouting.caution_factor must lie in (0, 1], got {0}")]
    CautionFactor(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReroutingConfig {
    /// Master switch for the connected-vehicle layer.
    pub enabled: bool,
    /// Travel time assumed for the breakdown edge.
    #[serde(rename = "override")]
    pub override_time: TravelTimeOverride,
    pub caution_factor: f64,
}

impl Default for ReroutingConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            override_time: TravelTimeOverride::Blocked,
            caution_factor: 0.5,
        }
    }
}

impl ReroutingConfig {
    pub fn validate(&self) -> Result<(), ReroutingError> {
        if !(self.caution_factor > 0.0 && self.caution_factor <= 1.0) {
            return Err(ReroutingError::CautionFactor(self.caution_factor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandleOutcome {
    RouteChanged,
    RouteKept,
    CautionEngaged,
}

pub fn handle_warning(
    vehicle: &mut Vehicle,
    warning: &BreakdownLocation,
    network: &RoadNetwork,
    override_time: TravelTimeOverride,
) -> HandleOutcome {
    if vehicle.mode == DriveMode::BrokenDown || !vehicle.remaining_edges().contains(&warning.edge) {
        return HandleOutcome::RouteKept;
    }
    if vehicle.current_edge() == warning.edge {
        if vehicle.pos > warning.pos {
            return HandleOutcome::RouteKept;
        }
        caution_mode(vehicle, warning);
        return HandleOutcome::CautionEngaged;
    }
    vehicle
        .view
        .insert(warning.edge, override_time)
        .expect("override validated at load");
    let from = network.edge(vehicle.current_edge()).to;
    let to = vehicle.route.destination;
    let detour = network
        .shortest_path_with(&vehicle.view, from, to)
        .filter(|sp| sp.cost.is_finite() && !sp.route.contains(warning.edge));
    match detour {
        Some(sp) => {
            let keep = vehicle.route_index + 1;
            if vehicle.route.edges[keep..] != sp.route.edges[..] {
                vehicle.route.edges.truncate(keep);
                vehicle.route.edges.extend_from_slice(&sp.route.edges);
                vehicle.rerouted = true;
            }
            HandleOutcome::RouteChanged
        }
        None => {
            caution_mode(vehicle, warning);
            HandleOutcome::CautionEngaged
        }
    }
}

/// Caps the vehicle's desired speed until it passes the breakdown position or
/// the breakdown is resolved.
pub fn caution_mode(vehicle: &mut Vehicle, warning: &BreakdownLocation) {
    if vehicle.mode == DriveMode::BrokenDown {
        return;
    }
    vehicle.mode = DriveMode::Caution;
    vehicle.caution = Some(CautionZone {
        breakdown_vehicle: warning.vehicle,
        edge: warning.edge,
        pos: warning.pos,
    });
}

/// Drops the override for the resolved breakdown and lifts caution. The
/// current route is kept.
pub fn handle_resolved(vehicle: &mut Vehicle, resolved: &BreakdownLocation) {
    vehicle.view.remove(resolved.edge);
    if vehicle.mode == DriveMode::Caution
        && vehicle
            .caution
            .is_some_and(|z| z.breakdown_vehicle == resolved.vehicle)
    {
        vehicle.mode = DriveMode::Normal;
        vehicle.caution = None;
    }
}
