//! The step loop tying traffic, messaging, incidents and rerouting together.
//!
//! Phases at each step time `t`:
//! 1. breakdown transitions,
//! 2. queued relays, beacons and breakdown warnings go on air,
//! 3. inboxes are drained and warnings handled,
//! 4. due vehicles are inserted,
//! 5. the traffic advances to `t + dt`,
//! 6. detectors and the trace record the state at `t + dt`.

use std::collections::{BTreeMap, HashSet};

use log::debug;
use thiserror::Error;

use crate::incident::{
    fire_transition, initialize_schedule, warning_due, BreakdownSchedule, IncidentError, IncidentState,
    TransitionKind,
};
use crate::metrics::{
    decel_stats, detector_step, journey_aggregates, Detector, DetectorRecord, JourneyRecord, Profile,
    StallRecord, StepTraceRow, Summary,
};
use crate::network::{NetworkError, RoadNetwork};
use crate::rerouting::{handle_resolved, handle_warning, HandleOutcome, ReroutingConfig, ReroutingError};
use crate::traffic::{DemandSpec, TrafficSettings, VehicleId, World, WorldError};
use crate::v2x::{Channel, CommConfig, DeliveryRow, MessageKey, MessageKind, Payload, Station, V2xError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    V2x(#[from] V2xError),
    #[error(transparent)]
    Incident(#[from] IncidentError),
    #[error(transparent)]
    Rerouting(#[from] ReroutingError),
    #[error("detector {detector}: {source}")]
    Detector {
        detector: String,
        source: NetworkError,
    },
    #[error("detector {detector}: position {pos} outside edge {edge}")]
    DetectorPosition { detector: String, edge: String, pos: f64 },
    #[error("invalid setting: {0}")]
    Setting(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub end_time: f64,
    pub stall_threshold: f64,
    pub comm: CommConfig,
    pub breakdown: Option<BreakdownSchedule>,
    pub rerouting: ReroutingConfig,
    /// Keep per-step trace rows in the output.
    pub trace: bool,
    pub log_beacons: bool,
    pub profile_vehicles: Vec<VehicleId>,
    /// `(id, edge id, position)`.
    pub detectors: Vec<(String, String, f64)>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            dt: 1.0,
            end_time: 1000.0,
            stall_threshold: 300.0,
            comm: CommConfig::default(),
            breakdown: None,
            rerouting: ReroutingConfig::default(),
            trace: true,
            log_beacons: false,
            profile_vehicles: Vec::new(),
            detectors: Vec::new(),
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub journeys: Vec<JourneyRecord>,
    pub trace: Vec<StepTraceRow>,
    pub detections: Vec<DetectorRecord>,
    pub messages: Vec<DeliveryRow>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HandlerCounts {
    pub changed: u64,
    pub kept: u64,
    pub caution: u64,
    pub resolved: u64,
}

pub struct Simulation {
    config: SimulationConfig,
    world: World,
    channel: Option<Channel>,
    incident: Option<IncidentState>,
    detectors: Vec<Detector>,
    demand_size: usize,
    journeys: Vec<JourneyRecord>,
    stalled: Vec<StallRecord>,
    trace: Vec<StepTraceRow>,
    accels: Vec<f64>,
    detections: Vec<DetectorRecord>,
    profiles: BTreeMap<VehicleId, Profile>,
    handled: HashSet<(VehicleId, MessageKey)>,
    duplicate_handler_calls: u64,
    counts: HandlerCounts,
    cautioned: HashSet<VehicleId>,
    warnings_emitted: u64,
    resolved_emitted: u64,
}

impl Simulation {
    pub fn new(network: RoadNetwork, demand: &DemandSpec, config: SimulationConfig) -> Result<Self, EngineError> {
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(EngineError::Setting("dt must be > 0".into()));
        }
        if !(config.end_time > 0.0 && config.end_time.is_finite()) {
            return Err(EngineError::Setting("end_time must be > 0".into()));
        }
        config.comm.validate()?;
        config.rerouting.validate()?;
        if let Some(b) = &config.breakdown {
            b.validate()?;
        }
        let mut detectors = Vec::with_capacity(config.detectors.len());
        for (id, edge, pos) in &config.detectors {
            let e = network.require_edge(edge).map_err(|source| EngineError::Detector {
                detector: id.clone(),
                source,
            })?;
            if !(0.0..=network.edge(e).length).contains(pos) {
                return Err(EngineError::DetectorPosition {
                    detector: id.clone(),
                    edge: edge.clone(),
                    pos: *pos,
                });
            }
            detectors.push(Detector {
                id: id.clone(),
                edge: e,
                pos: *pos,
                count: 0,
            });
        }
        let settings = TrafficSettings {
            dt: config.dt,
            caution_factor: config.rerouting.caution_factor,
        };
        let world = World::new(network, demand, settings, config.seed)?;
        let channel = config
            .rerouting
            .enabled
            .then(|| Channel::new(config.comm.clone(), config.log_beacons));
        let incident = config
            .breakdown
            .as_ref()
            .map(|b| initialize_schedule(b, 0.0, config.seed));
        let profiles = config
            .profile_vehicles
            .iter()
            .map(|&id| (id, Profile::default()))
            .collect();
        Ok(Self {
            world,
            channel,
            incident,
            detectors,
            demand_size: demand.len(),
            journeys: Vec::new(),
            stalled: Vec::new(),
            trace: Vec::new(),
            accels: Vec::new(),
            detections: Vec::new(),
            profiles,
            handled: HashSet::new(),
            duplicate_handler_calls: 0,
            counts: HandlerCounts::default(),
            cautioned: HashSet::new(),
            warnings_emitted: 0,
            resolved_emitted: 0,
            config,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn channel(&self) -> Option<&Channel> {
        self.channel.as_ref()
    }

    pub fn incident(&self) -> Option<&IncidentState> {
        self.incident.as_ref()
    }

    pub fn handler_counts(&self) -> HandlerCounts {
        self.counts
    }

    pub fn duplicate_handler_calls(&self) -> u64 {
        self.duplicate_handler_calls
    }

    pub fn journeys(&self) -> &[JourneyRecord] {
        &self.journeys
    }

    pub fn time(&self) -> f64 {
        self.world.time()
    }

    /// Whether the loop should stop: end time reached or every vehicle has
    /// left the network.
    pub fn is_finished(&self) -> bool {
        self.world.time() >= self.config.end_time - 1e-9 || self.world.is_done()
    }

    pub fn step(&mut self) -> Result<(), EngineError> {
        let t = self.world.time();

        let mut stations = None;
        if let Some(state) = self.incident.as_mut() {
            if let Some(event) = fire_transition(state, &mut self.world, t) {
                debug!("t={t}: breakdown {:?} of {:?}", event.kind, event.vehicle);
                if let (TransitionKind::Stop, true, Some(channel)) = (event.kind, event.applied, self.channel.as_mut()) {
                    let st = stations.get_or_insert_with(|| Self::snapshot(&self.world));
                    let origin = event.vehicle.expect("applied transition has a target");
                    let v = self.world.vehicle(origin).expect("released vehicle is active");
                    let payload = Payload::Breakdown(crate::v2x::BreakdownLocation {
                        vehicle: origin,
                        edge: v.current_edge(),
                        pos: v.pos,
                    });
                    channel.originate(t, st, origin, MessageKind::BreakdownResolved, payload)?;
                    self.resolved_emitted += 1;
                }
            }
        }

        if let Some(channel) = self.channel.as_mut() {
            let st = stations.get_or_insert_with(|| Self::snapshot(&self.world));
            channel.flush_relays(t, st);
            channel.beacon_step(t, st);
            if let Some(loc) = self
                .incident
                .as_ref()
                .and_then(|s| warning_due(s, t, self.config.comm.beacon_interval_s))
            {
                channel.originate(t, st, loc.vehicle, MessageKind::BreakdownWarning, Payload::Breakdown(loc))?;
                self.warnings_emitted += 1;
            }

            for (receiver, message) in channel.relay_step() {
                if !self.handled.insert((receiver, message.key())) {
                    self.duplicate_handler_calls += 1;
                }
                let Payload::Breakdown(loc) = message.payload else {
                    continue;
                };
                let Some((vehicle, network)) = self.world.vehicle_and_network(receiver) else {
                    continue;
                };
                match message.kind {
                    MessageKind::BreakdownWarning => {
                        match handle_warning(vehicle, &loc, network, self.config.rerouting.override_time) {
                            HandleOutcome::RouteChanged => self.counts.changed += 1,
                            HandleOutcome::RouteKept => self.counts.kept += 1,
                            HandleOutcome::CautionEngaged => {
                                self.counts.caution += 1;
                                self.cautioned.insert(receiver);
                            }
                        }
                    }
                    MessageKind::BreakdownResolved => {
                        handle_resolved(vehicle, &loc);
                        self.counts.resolved += 1;
                    }
                    MessageKind::Beacon => {}
                }
            }
        }

        self.world.spawn_step();
        let outcome = self.world.advance()?;
        let now = self.world.time();

        self.detections
            .extend(detector_step(&outcome.moves, &mut self.detectors, now));
        for v in outcome.arrivals {
            if v.longest_stop > self.config.stall_threshold {
                self.stalled.push(StallRecord {
                    vehicle: v.id,
                    longest_stop_s: v.longest_stop,
                    arrived: true,
                });
            }
            if let Some(channel) = self.channel.as_mut() {
                channel.forget(v.id);
            }
            let record = JourneyRecord::from_vehicle(&v, self.world.network()).expect("arrived vehicle");
            self.journeys.push(record);
        }
        for v in self.world.vehicles() {
            self.accels.push(v.accel);
            if self.config.trace {
                self.trace.push(StepTraceRow {
                    t: now,
                    vehicle: v.id,
                    edge: v.current_edge(),
                    pos: v.pos,
                    speed: v.speed,
                    accel: v.accel,
                });
            }
            if let Some(p) = self.profiles.get_mut(&v.id) {
                p.t.push(now);
                p.speed.push(v.speed);
                p.accel.push(v.accel);
            }
        }
        Ok(())
    }

    fn snapshot(world: &World) -> Vec<Station> {
        world
            .vehicles()
            .map(|v| Station {
                id: v.id,
                position: world.position(v.id).expect("active vehicle"),
                depart_time: v.depart_time,
                speed: v.speed,
                accel: v.accel,
            })
            .collect()
    }

    pub fn run(mut self) -> Result<RunOutput, EngineError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    /// Closes the run at the current time and assembles the outputs.
    pub fn finish(mut self) -> RunOutput {
        for v in self.world.vehicles() {
            if v.longest_stop > self.config.stall_threshold {
                self.stalled.push(StallRecord {
                    vehicle: v.id,
                    longest_stop_s: v.longest_stop,
                    arrived: false,
                });
            }
        }
        self.stalled.sort_by_key(|s| s.vehicle);
        self.journeys.sort_by_key(|j| j.vehicle);
        let (mean_delay_s, max_delay_s, mean_journey_time_s) = journey_aggregates(&self.journeys);
        let counters = self.world.counters();
        let active_at_end = self.world.active_count();
        let pending_at_end = self.world.pending_count();
        let deliveries = self
            .channel
            .as_ref()
            .map(|c| c.deliveries().iter().map(|(k, n)| (k.to_string(), *n)).collect())
            .unwrap_or_default();
        let summary = Summary {
            scenario: self.config.name.clone(),
            seed: self.config.seed,
            dt_s: self.config.dt,
            end_time_s: self.config.end_time,
            final_time_s: self.world.time(),
            steps: self.world.step_index(),
            demand: self.demand_size,
            inserted: counters.inserted,
            arrived: counters.arrived,
            active_at_end,
            pending_at_end,
            incomplete: counters.arrived == 0 || active_at_end > 0 || pending_at_end > 0,
            mean_delay_s,
            max_delay_s,
            mean_journey_time_s,
            reroute_count: self.journeys.iter().filter(|j| j.rerouted).count()
                + self.world.vehicles().filter(|v| v.rerouted).count(),
            caution_count: self.cautioned.len(),
            decel: decel_stats(self.accels.iter().copied()),
            detector_counts: self.detectors.iter().map(|d| (d.id.clone(), d.count)).collect(),
            deliveries,
            warnings_emitted: self.warnings_emitted,
            resolved_emitted: self.resolved_emitted,
            duplicate_handler_calls: self.duplicate_handler_calls,
            breakdown_events: self.incident.as_ref().map(|s| s.events.clone()).unwrap_or_default(),
            stalled: self.stalled,
            profiles: self
                .profiles
                .into_iter()
                .map(|(id, p)| (id.to_string(), p))
                .collect(),
        };
        RunOutput {
            journeys: self.journeys,
            trace: self.trace,
            detections: self.detections,
            messages: self.channel.map(|mut c| c.take_log()).unwrap_or_default(),
            summary,
        }
    }
}
