//! Scheduled vehicle breakdowns: forced stops, periodic warnings while the
//! vehicle is down, and release back to car-following control.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, Stream};
use crate::traffic::{DriveMode, VehicleId, World};
use crate::v2x::{on_period, BreakdownLocation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IncidentError {
    #[error("breakdown.{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

/// Which vehicle breaks down, and when. The first stop happens `start_s`
/// after the scenario start; each stop lasts `duration_s` and the next one
/// begins `interval_s` after the previous resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakdownSchedule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<VehicleId>,
    #[serde(default = "one")]
    pub count: u32,
    pub start_s: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub interval_s: f64,
    /// Pick the target among vehicles active at the first start.
    #[serde(default)]
    pub random: bool,
    /// Seed for the random pick; the scenario seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one() -> u32 {
    1
}

fn default_duration() -> f64 {
    300.0
}

impl BreakdownSchedule {
    pub fn new(target: VehicleId, count: u32, start_s: f64, duration_s: f64, interval_s: f64) -> Self {
        Self {
            target: Some(target),
            count,
            start_s,
            duration_s,
            interval_s,
            random: false,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), IncidentError> {
        let bad = |field, message: &str| {
            Err(IncidentError::Invalid {
                field,
                message: message.to_string(),
            })
        };
        if !(self.start_s >= 0.0 && self.start_s.is_finite()) {
            return bad("start_s", "must be finite and >= 0");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s", "must be finite and > 0");
        }
        if self.count > 1 && !(self.interval_s > 0.0 && self.interval_s.is_finite()) {
            return bad("interval_s", "must be > 0 when count > 1");
        }
        if self.count > 0 && self.target.is_none() && !self.random {
            return bad("target", "required unless random = true");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    Start,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub t: f64,
    pub kind: TransitionKind,
    pub vehicle: Option<VehicleId>,
    /// False when the target was not in the network and the transition was
    /// skipped.
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidentState {
    pub remaining_count: u32,
    pub active: bool,
    pub location: Option<BreakdownLocation>,
    pub next_transition: Option<(f64, TransitionKind)>,
    /// Start time of the current active window.
    pub active_since: Option<f64>,
    pub target: Option<VehicleId>,
    pub events: Vec<TransitionEvent>,
    duration: f64,
    interval: f64,
    random: bool,
    seed: u64,
}

pub fn initialize_schedule(schedule: &BreakdownSchedule, t0: f64, scenario_seed: u64) -> IncidentState {
    IncidentState {
        remaining_count: schedule.count,
        active: false,
        location: None,
        next_transition: (schedule.count > 0).then_some((t0 + schedule.start_s, TransitionKind::Start)),
        active_since: None,
        target: if schedule.random { None } else { schedule.target },
        events: Vec::new(),
        duration: schedule.duration_s,
        interval: schedule.interval_s,
        random: schedule.random,
        seed: schedule.seed.unwrap_or(scenario_seed),
    }
}

impl IncidentState {
    /// Whether a transition is due at `t` (fires at the first step at or
    /// after its scheduled time).
    pub fn is_due(&self, t: f64) -> bool {
        self.next_transition.is_some_and(|(at, _)| at <= t + 1e-9)
    }
}

/// Fires the pending transition if it is due at `t`. A target that is not in
/// the network is logged and skipped; the timeline advances regardless.
pub fn fire_transition(state: &mut IncidentState, world: &mut World, t: f64) -> Option<TransitionEvent> {
    if !state.is_due(t) {
        return None;
    }
    let (_, kind) = state.next_transition?;
    if kind == TransitionKind::Start && state.target.is_none() && state.random {
        let ids = world.vehicle_ids();
        if !ids.is_empty() {
            let mut rng = stream_rng(state.seed, Stream::Incident, 0);
            state.target = Some(ids[rng.random_range(0..ids.len())]);
        }
    }
    let target = state.target;
    let applied = match kind {
        TransitionKind::Start => {
            state.remaining_count -= 1;
            state.next_transition = Some((t + state.duration, TransitionKind::Stop));
            let located = target.and_then(|id| {
                world.vehicle(id).map(|v| BreakdownLocation {
                    vehicle: id,
                    edge: v.current_edge(),
                    pos: v.pos,
                })
            });
            match located {
                Some(loc) => {
                    world.force_stop(loc.vehicle);
                    state.active = true;
                    state.active_since = Some(t);
                    state.location = Some(loc);
                    true
                }
                None => {
                    warn!("breakdown start at t={t}: target {target:?} is not in the network, skipped");
                    false
                }
            }
        }
        TransitionKind::Stop => {
            state.next_transition =
                (state.remaining_count > 0).then_some((t + state.interval, TransitionKind::Start));
            let was_active = state.active;
            state.active = false;
            state.active_since = None;
            state.location = None;
            let released = target.is_some_and(|id| world.release(id));
            if was_active && !released {
                warn!("breakdown stop at t={t}: target {target:?} already left the network");
            }
            was_active && released
        }
    };
    let event = TransitionEvent {
        t,
        kind,
        vehicle: target,
        applied,
    };
    state.events.push(event);
    Some(event)
}

/// Whether the broken-down vehicle sends a warning at `t`: one per beacon
/// interval, counted from the start of the active window.
pub fn warning_due(state: &IncidentState, t: f64, beacon_interval: f64) -> Option<BreakdownLocation> {
    let since = state.active_since?;
    if state.active && on_period(t - since, beacon_interval) {
        state.location
    } else {
        None
    }
}

/// Whether the target is stopped as required while the incident is active.
pub fn is_consistent(state: &IncidentState, world: &World) -> bool {
    match (state.active, state.target.and_then(|id| world.vehicle(id))) {
        (true, Some(v)) => v.mode == DriveMode::BrokenDown && v.speed == 0.0,
        _ => true,
    }
}
