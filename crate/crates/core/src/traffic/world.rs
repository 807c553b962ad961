use std::collections::{BTreeMap, HashMap, VecDeque};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::class::VehicleClass;
use super::demand::DemandSpec;
use super::krauss::{krauss_step, safe_speed, KraussError, Leader};
use super::lane_change::{lane_change_decide, AdjacentLane, Changer, LaneDecision, RearVehicle};
use super::{DriveMode, VehicleId};
use crate::network::{EdgeIndex, NetworkError, Overrides, RoadNetwork, Route};
use crate::rng::{stream_rng, Stream};

/// How far ahead (m) a vehicle looks along its route for a leader or a lower
/// speed limit.
const LOOKAHEAD: f64 = 250.0;
/// Distance to the next node (m) within which vehicles from other approaches
/// to the same downstream lane are treated as merge conflicts.
const MERGE_HORIZON: f64 = 150.0;
/// Below this speed (m/s) a vehicle counts as stopped for stall detection.
const STOPPED_SPEED: f64 = 0.1;
const EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("vehicle {vehicle}: no route from {origin} to {destination}")]
    NoRoute {
        vehicle: VehicleId,
        origin: String,
        destination: String,
    },
    #[error("vehicle {vehicle}: {source}")]
    Network {
        vehicle: VehicleId,
        source: NetworkError,
    },
    #[error("vehicle {vehicle} already exists")]
    DuplicateVehicle { vehicle: VehicleId },
    #[error("invalid placement of vehicle {vehicle}: {reason}")]
    Placement { vehicle: VehicleId, reason: String },
    #[error("vehicle {vehicle}: {source}")]
    CarFollowing {
        vehicle: VehicleId,
        source: KraussError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficSettings {
    /// Step length in seconds.
    pub dt: f64,
    /// Multiplier on the desired-speed cap while in caution mode.
    pub caution_factor: f64,
}

impl Default for TrafficSettings {
    fn default() -> Self {
        Self {
            dt: 1.0,
            caution_factor: 0.5,
        }
    }
}

/// The stretch a cautious vehicle must clear before resuming normal driving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CautionZone {
    pub breakdown_vehicle: VehicleId,
    pub edge: EdgeIndex,
    pub pos: f64,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub route: Route,
    pub route_index: usize,
    pub lane: u32,
    /// Front bumper, meters along the current edge.
    pub pos: f64,
    pub speed: f64,
    /// Signed acceleration over the last step.
    pub accel: f64,
    pub mode: DriveMode,
    pub depart_time: f64,
    pub arrive_time: Option<f64>,
    pub rerouted: bool,
    /// Private travel-time overrides learned from warnings.
    pub view: Overrides,
    pub caution: Option<CautionZone>,
    /// Longest continuous standstill so far (s).
    pub longest_stop: f64,
    stopped_for: f64,
    /// Speed reported at the end of the previous step.
    last_speed: f64,
    rng: ChaCha8Rng,
}

impl Vehicle {
    pub fn current_edge(&self) -> EdgeIndex {
        self.route.edges[self.route_index]
    }

    /// Edges still to be driven, current edge included.
    pub fn remaining_edges(&self) -> &[EdgeIndex] {
        &self.route.edges[self.route_index..]
    }

    pub fn next_edge(&self) -> Option<EdgeIndex> {
        self.route.edges.get(self.route_index + 1).copied()
    }
}

/// Direct placement of a vehicle, bypassing demand. Used by tests and
/// examples that need hand-built situations.
#[derive(Debug, Clone)]
pub struct Placement {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub route: Route,
    pub route_index: usize,
    pub lane: u32,
    pub pos: f64,
    pub speed: f64,
}

/// A stretch of edge covered during one step. `entered` marks an edge the
/// vehicle moved onto during the step (it started upstream of `from`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub edge: EdgeIndex,
    pub from: f64,
    pub to: f64,
    pub entered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Movement {
    pub vehicle: VehicleId,
    pub segments: Vec<Segment>,
    pub speed: f64,
}

#[derive(Debug, Default)]
pub struct StepOutcome {
    pub moves: Vec<Movement>,
    /// Vehicles that reached their destination during the step, already
    /// removed from the world.
    pub arrivals: Vec<Vehicle>,
}

#[derive(Debug, Clone)]
struct PendingVehicle {
    id: VehicleId,
    class: VehicleClass,
    route: Route,
    depart: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub inserted: usize,
    pub arrived: usize,
    pub removed: usize,
}

/// Vehicles per (edge, lane), sorted by position then id.
struct Occupancy(HashMap<(EdgeIndex, u32), Vec<VehicleId>>);

impl Occupancy {
    fn build(vehicles: &BTreeMap<VehicleId, Vehicle>) -> Self {
        let mut map: HashMap<(EdgeIndex, u32), Vec<VehicleId>> = HashMap::new();
        for v in vehicles.values() {
            map.entry((v.current_edge(), v.lane)).or_default().push(v.id);
        }
        for list in map.values_mut() {
            list.sort_by(|a, b| {
                let (va, vb) = (&vehicles[a], &vehicles[b]);
                va.pos.total_cmp(&vb.pos).then(a.cmp(b))
            });
        }
        Occupancy(map)
    }

    fn lane(&self, edge: EdgeIndex, lane: u32) -> &[VehicleId] {
        self.0.get(&(edge, lane)).map_or(&[], Vec::as_slice)
    }

    fn remove(&mut self, edge: EdgeIndex, lane: u32, id: VehicleId) {
        if let Some(list) = self.0.get_mut(&(edge, lane)) {
            list.retain(|x| *x != id);
        }
    }

    fn insert_sorted(
        &mut self,
        vehicles: &BTreeMap<VehicleId, Vehicle>,
        edge: EdgeIndex,
        lane: u32,
        id: VehicleId,
        pos: f64,
    ) {
        let list = self.0.entry((edge, lane)).or_default();
        let at = list
            .iter()
            .position(|o| {
                let p = vehicles[o].pos;
                p > pos || (p == pos && *o > id)
            })
            .unwrap_or(list.len());
        list.insert(at, id);
    }
}

/// A vehicle within [`MERGE_HORIZON`] of the end of its edge, keyed by the
/// downstream edge and lane it will enter.
#[derive(Clone, Copy)]
struct Approach {
    id: VehicleId,
    edge: EdgeIndex,
    lane: u32,
    dist: f64,
    speed: f64,
    length: f64,
    /// can no longer stop before the node at max_decel
    committed: bool,
}

impl Approach {
    /// Merge precedence: committed vehicles first, then nearest the node,
    /// then lowest id.
    fn precedes(&self, other: &Approach) -> bool {
        (!self.committed, self.dist, self.id) < (!other.committed, other.dist, other.id)
    }
}

/// Gap bound against a leader's final position this step:
/// `speed * dt <= max(floor, gap + leader_speed * dt)`.
struct HardLink {
    leader: VehicleId,
    gap: f64,
    floor: f64,
}

/// Lowers planned speeds until every gap bound holds. Bounds only ever
/// decrease, so a front-to-back cascade settles within one pass per vehicle.
fn resolve_gap_bounds(ids: &[VehicleId], links: &[Vec<HardLink>], speeds: &mut [f64], dt: f64) {
    for _ in 0..=ids.len() {
        let mut changed = false;
        for i in 0..ids.len() {
            for link in &links[i] {
                let Ok(j) = ids.binary_search(&link.leader) else { continue };
                let bound = (link.gap + speeds[j] * dt).max(link.floor).max(0.0) / dt;
                if speeds[i] > bound {
                    speeds[i] = bound;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Movement order in which every linked leader moves before its follower,
/// so admission onto a shared lane sees where the leader really ended up.
/// Ties (and any cycle) fall back to ascending id.
fn leaders_first(ids: &[VehicleId], links: &[Vec<HardLink>]) -> Vec<usize> {
    fn visit(i: usize, ids: &[VehicleId], links: &[Vec<HardLink>], seen: &mut [bool], order: &mut Vec<usize>) {
        if seen[i] {
            return;
        }
        seen[i] = true;
        for link in &links[i] {
            if let Ok(j) = ids.binary_search(&link.leader) {
                visit(j, ids, links, seen, order);
            }
        }
        order.push(i);
    }
    let mut seen = vec![false; ids.len()];
    let mut order = Vec::with_capacity(ids.len());
    for i in 0..ids.len() {
        visit(i, ids, links, &mut seen, &mut order);
    }
    order
}

pub struct World {
    network: RoadNetwork,
    settings: TrafficSettings,
    seed: u64,
    step: u64,
    vehicles: BTreeMap<VehicleId, Vehicle>,
    pending: VecDeque<PendingVehicle>,
    counters: Counters,
}

impl World {
    /// Resolves each demand entry's initial route with the base network
    /// weights.
    pub fn new(
        network: RoadNetwork,
        demand: &DemandSpec,
        settings: TrafficSettings,
        seed: u64,
    ) -> Result<Self, WorldError> {
        let mut routes: HashMap<(String, String), Route> = HashMap::new();
        let mut pending = VecDeque::with_capacity(demand.len());
        for entry in demand.entries() {
            let key = (entry.origin.clone(), entry.destination.clone());
            let route = match routes.get(&key) {
                Some(r) => r.clone(),
                None => {
                    let sp = network
                        .shortest_path(&entry.origin, &entry.destination)
                        .map_err(|source| WorldError::Network {
                            vehicle: entry.id,
                            source,
                        })?
                        .ok_or_else(|| WorldError::NoRoute {
                            vehicle: entry.id,
                            origin: entry.origin.clone(),
                            destination: entry.destination.clone(),
                        })?;
                    routes.insert(key, sp.route.clone());
                    sp.route
                }
            };
            pending.push_back(PendingVehicle {
                id: entry.id,
                class: VehicleClass::for_kind(entry.kind),
                route,
                depart: entry.depart,
            });
        }
        Ok(Self {
            network,
            settings,
            seed,
            step: 0,
            vehicles: BTreeMap::new(),
            pending,
            counters: Counters::default(),
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn settings(&self) -> &TrafficSettings {
        &self.settings
    }

    pub fn dt(&self) -> f64 {
        self.settings.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Current simulation time (s).
    pub fn time(&self) -> f64 {
        self.step as f64 * self.settings.dt
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn active_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Active vehicles in ascending id order.
    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.values()
    }

    pub fn vehicle_ids(&self) -> Vec<VehicleId> {
        self.vehicles.keys().copied().collect()
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles.get(&id)
    }

    pub fn vehicle_mut(&mut self, id: VehicleId) -> Option<&mut Vehicle> {
        self.vehicles.get_mut(&id)
    }

    /// Mutable vehicle together with the (immutable) network, for handlers
    /// that reroute.
    pub fn vehicle_and_network(&mut self, id: VehicleId) -> Option<(&mut Vehicle, &RoadNetwork)> {
        let network = &self.network;
        self.vehicles.get_mut(&id).map(|v| (v, network))
    }

    /// Planar position of an active vehicle's front bumper.
    pub fn position(&self, id: VehicleId) -> Option<(f64, f64)> {
        self.vehicles
            .get(&id)
            .map(|v| self.network.position_on_edge(v.current_edge(), v.pos))
    }

    pub fn is_done(&self) -> bool {
        self.pending.is_empty() && self.vehicles.is_empty()
    }

    pub fn place(&mut self, p: Placement) -> Result<(), WorldError> {
        let bad = |reason: &str| WorldError::Placement {
            vehicle: p.id,
            reason: reason.to_string(),
        };
        if self.vehicles.contains_key(&p.id) {
            return Err(WorldError::DuplicateVehicle { vehicle: p.id });
        }
        if !p.route.is_connected(&self.network) {
            return Err(bad("route is not connected"));
        }
        let Some(&edge) = p.route.edges.get(p.route_index) else {
            return Err(bad("route index out of range"));
        };
        let e = self.network.edge(edge);
        if !(0.0..=e.length).contains(&p.pos) {
            return Err(bad("position outside edge"));
        }
        if p.lane >= e.lanes {
            return Err(bad("lane does not exist"));
        }
        if !(0.0..=p.class.max_speed).contains(&p.speed) {
            return Err(bad("speed outside [0, max_speed]"));
        }
        let vehicle = self.make_vehicle(p.id, p.class, p.route, p.lane, p.speed);
        let vehicle = Vehicle {
            route_index: p.route_index,
            pos: p.pos,
            ..vehicle
        };
        self.vehicles.insert(p.id, vehicle);
        self.counters.inserted += 1;
        Ok(())
    }

    fn make_vehicle(
        &self,
        id: VehicleId,
        class: VehicleClass,
        route: Route,
        lane: u32,
        speed: f64,
    ) -> Vehicle {
        Vehicle {
            id,
            class,
            route,
            route_index: 0,
            lane,
            pos: 0.0,
            speed,
            accel: 0.0,
            mode: DriveMode::Normal,
            depart_time: self.time(),
            arrive_time: None,
            rerouted: false,
            view: Overrides::new(),
            caution: None,
            longest_stop: 0.0,
            stopped_for: 0.0,
            last_speed: speed,
            rng: stream_rng(self.seed, Stream::Driver, u64::from(id.0)),
        }
    }

    /// Inserts every due demand entry whose first edge has room at its
    /// entry. Entries that do not fit are deferred, preserving order per
    /// first edge.
    pub fn spawn_step(&mut self) -> Vec<VehicleId> {
        let now = self.time();
        let mut inserted = Vec::new();
        let mut blocked: Vec<EdgeIndex> = Vec::new();
        let mut kept = VecDeque::with_capacity(self.pending.len());
        while let Some(p) = self.pending.pop_front() {
            if p.depart > now + EPS {
                kept.push_back(p);
                kept.extend(self.pending.drain(..));
                break;
            }
            let first = p.route.edges[0];
            if blocked.contains(&first) {
                kept.push_back(p);
                continue;
            }
            let speed = self.network.edge(first).speed_limit.min(p.class.max_speed);
            match self.entry_lane(first, &p.class, speed) {
                Some(lane) => {
                    let vehicle = self.make_vehicle(p.id, p.class, p.route, lane, speed);
                    self.vehicles.insert(p.id, vehicle);
                    self.counters.inserted += 1;
                    inserted.push(p.id);
                }
                None => {
                    blocked.push(first);
                    kept.push_back(p);
                }
            }
        }
        self.pending = kept;
        inserted
    }

    /// Lane with the largest entry gap that satisfies the insertion rule:
    /// last vehicle's front at least `min_gap + length` past the start, and
    /// an entrant at `speed` would not need more than max_decel behind it.
    fn entry_lane(&self, edge: EdgeIndex, class: &VehicleClass, speed: f64) -> Option<u32> {
        let lanes = self.network.edge(edge).lanes;
        let mut best: Option<(f64, u32)> = None;
        for lane in 0..lanes {
            let last = self
                .vehicles
                .values()
                .filter(|v| v.current_edge() == edge && v.lane == lane)
                .min_by(|a, b| a.pos.total_cmp(&b.pos).then(a.id.cmp(&b.id)));
            let ok_gap = match last {
                None => Some(f64::INFINITY),
                Some(l) if l.pos >= l.class.min_gap + l.class.length && self.comfortable_entry(l, class, speed) => {
                    Some(l.pos)
                }
                Some(_) => None,
            };
            if let Some(g) = ok_gap {
                if best.is_none_or(|(bg, _)| g > bg) {
                    best = Some((g, lane));
                }
            }
        }
        best.map(|(_, lane)| lane)
    }

    fn mapped_lane(&self, lane: u32, next: EdgeIndex) -> u32 {
        lane.min(self.network.edge(next).lanes - 1)
    }

    /// Speed the vehicle wants to drive: class maximum, halved (by default)
    /// in caution mode, edge limit and anticipated lower limits ahead. A
    /// drop in the cap is followed at no more than `max_decel`.
    fn desired_cap(&self, v: &Vehicle) -> f64 {
        let mut cap = v.class.max_speed;
        if v.mode == DriveMode::Caution {
            cap *= self.settings.caution_factor;
        }
        let edge = self.network.edge(v.current_edge());
        cap = cap.min(edge.speed_limit);
        let mut dist = edge.length - v.pos;
        for &next in &v.route.edges[v.route_index + 1..] {
            if dist > LOOKAHEAD {
                break;
            }
            let e = self.network.edge(next);
            cap = cap.min((e.speed_limit.powi(2) + 2.0 * v.class.max_decel * dist).sqrt());
            dist += e.length;
        }
        cap.max(v.speed - v.class.max_decel * self.settings.dt)
    }

    fn same_lane_leader(&self, occ: &Occupancy, v: &Vehicle) -> Option<(VehicleId, Leader)> {
        let list = occ.lane(v.current_edge(), v.lane);
        let at = list.iter().position(|x| *x == v.id)?;
        list.get(at + 1).map(|lid| {
            let l = &self.vehicles[lid];
            let leader = Leader {
                speed: l.speed,
                gap: l.pos - l.class.length - v.pos,
            };
            (*lid, leader)
        })
    }

    /// Nearest vehicle on the same lane further along the route, beyond the
    /// current edge. The gap is negative while a leader that has just entered
    /// from another approach still hangs back over its old edge.
    fn downstream_leader(&self, occ: &Occupancy, v: &Vehicle) -> Option<(VehicleId, Leader)> {
        let mut dist = self.network.edge(v.current_edge()).length - v.pos;
        let mut lane = v.lane;
        for &next in &v.route.edges[v.route_index + 1..] {
            if dist > LOOKAHEAD {
                return None;
            }
            lane = self.mapped_lane(lane, next);
            if let Some(first) = occ.lane(next, lane).first() {
                let l = &self.vehicles[first];
                let leader = Leader {
                    speed: l.speed,
                    gap: dist + l.pos - l.class.length,
                };
                return Some((*first, leader));
            }
            dist += self.network.edge(next).length;
        }
        None
    }

    fn merge_constraints(
        &self,
        approaches: &HashMap<(EdgeIndex, u32), Vec<Approach>>,
        v: &Vehicle,
        out: &mut Vec<(VehicleId, Leader)>,
    ) {
        let Some(next) = v.next_edge() else {
            return;
        };
        let d_v = self.network.edge(v.current_edge()).length - v.pos;
        if d_v > MERGE_HORIZON {
            return;
        }
        let lane = self.mapped_lane(v.lane, next);
        let Some(list) = approaches.get(&(next, lane)) else {
            return;
        };
        let Some(me) = list.iter().find(|w| w.id == v.id) else {
            return;
        };
        for w in list {
            if w.id == v.id || (w.edge == v.current_edge() && w.lane == v.lane) {
                continue;
            }
            if !w.precedes(me) {
                continue;
            }
            // negative while side by side
            let leader = Leader {
                speed: w.speed,
                gap: d_v - w.dist - w.length,
            };
            out.push((w.id, leader));
        }
    }

    fn build_approaches(&self) -> HashMap<(EdgeIndex, u32), Vec<Approach>> {
        let mut map: HashMap<(EdgeIndex, u32), Vec<Approach>> = HashMap::new();
        for v in self.vehicles.values() {
            if v.mode == DriveMode::BrokenDown {
                continue;
            }
            let Some(next) = v.next_edge() else { continue };
            let dist = self.network.edge(v.current_edge()).length - v.pos;
            if dist > MERGE_HORIZON {
                continue;
            }
            map.entry((next, self.mapped_lane(v.lane, next)))
                .or_default()
                .push(Approach {
                    id: v.id,
                    edge: v.current_edge(),
                    lane: v.lane,
                    dist,
                    speed: v.speed,
                    length: v.class.length,
                    committed: v.speed * v.speed / (2.0 * v.class.max_decel) > dist,
                });
        }
        map
    }

    fn adjacent_lane(&self, occ: &Occupancy, v: &Vehicle, lane: u32) -> AdjacentLane {
        let list = occ.lane(v.current_edge(), lane);
        let split = list.partition_point(|o| self.vehicles[o].pos <= v.pos);
        let front = list.get(split).map(|o| {
            let w = &self.vehicles[o];
            Leader {
                speed: w.speed,
                gap: w.pos - w.class.length - v.pos,
            }
        });
        let rear = match split.checked_sub(1) {
            Some(i) => {
                let w = &self.vehicles[&list[i]];
                Some(RearVehicle {
                    speed: w.speed,
                    gap: v.pos - v.class.length - w.pos,
                    class: w.class,
                })
            }
            None => self.approaching_rear(occ, v, lane),
        };
        AdjacentLane { lane, front, rear }
    }

    /// The most constraining vehicle about to enter `v`'s edge into `lane`
    /// from an upstream edge, as a would-be follower of `v`.
    fn approaching_rear(&self, occ: &Occupancy, v: &Vehicle, lane: u32) -> Option<RearVehicle> {
        let edge = v.current_edge();
        let dt = self.settings.dt;
        let mut worst: Option<(f64, RearVehicle)> = None;
        for &up in self.network.incoming(self.network.edge(edge).from) {
            let len = self.network.edge(up).length;
            for l in 0..self.network.edge(up).lanes {
                if self.mapped_lane(l, edge) != lane {
                    continue;
                }
                let Some(w) = occ
                    .lane(up, l)
                    .iter()
                    .rev()
                    .map(|o| &self.vehicles[o])
                    .find(|w| w.next_edge() == Some(edge))
                else {
                    continue;
                };
                let rear = RearVehicle {
                    speed: w.speed,
                    gap: v.pos - v.class.length + (len - w.pos),
                    class: w.class,
                };
                let leader = Leader {
                    speed: v.speed,
                    gap: rear.gap,
                };
                let slack = safe_speed(w.speed, leader, &w.class, dt) - (w.speed - w.class.max_decel * dt);
                if worst.is_none_or(|(s, _)| slack < s) {
                    worst = Some((slack, rear));
                }
            }
        }
        worst.map(|(_, r)| r)
    }

    fn lane_changes(&mut self, occ: &mut Occupancy) {
        let dt = self.settings.dt;
        let ids: Vec<VehicleId> = self.vehicles.keys().copied().collect();
        for id in ids {
            let v = &self.vehicles[&id];
            if v.mode == DriveMode::BrokenDown {
                continue;
            }
            let edge = v.current_edge();
            let lanes = self.network.edge(edge).lanes;
            if lanes < 2 {
                continue;
            }
            let leader = self.same_lane_leader(occ, v).map(|(_, l)| l);
            let mut adjacent = Vec::with_capacity(2);
            if v.lane + 1 < lanes {
                adjacent.push(self.adjacent_lane(occ, v, v.lane + 1));
            }
            if v.lane > 0 {
                adjacent.push(self.adjacent_lane(occ, v, v.lane - 1));
            }
            let me = Changer {
                speed: v.speed,
                desired_speed: self.desired_cap(v),
                class: &v.class,
            };
            if let LaneDecision::Change(lane) = lane_change_decide(me, leader, &adjacent, dt) {
                let (old, pos) = (v.lane, v.pos);
                occ.remove(edge, old, id);
                occ.insert_sorted(&self.vehicles, edge, lane, id, pos);
                self.vehicles.get_mut(&id).expect("active vehicle").lane = lane;
            }
        }
    }

    /// One synchronous step: lane changes (sequential, ascending id), then
    /// new speeds from start-of-step positions, then movement with edge
    /// transitions and arrivals.
    pub fn advance(&mut self) -> Result<StepOutcome, WorldError> {
        let dt = self.settings.dt;
        let mut occ = Occupancy::build(&self.vehicles);
        self.lane_changes(&mut occ);
        let approaches = self.build_approaches();

        let ids: Vec<VehicleId> = self.vehicles.keys().copied().collect();
        let mut new_speeds = Vec::with_capacity(ids.len());
        let mut constraints = Vec::new();
        let mut merges = Vec::new();
        let mut hard_links = Vec::with_capacity(ids.len());
        for &id in &ids {
            let v = &self.vehicles[&id];
            if v.mode == DriveMode::BrokenDown {
                new_speeds.push(0.0);
                hard_links.push(Vec::new());
                continue;
            }
            constraints.clear();
            let ahead = match self.same_lane_leader(&occ, v) {
                Some((_, l)) if l.gap < 0.0 => {
                    return Err(WorldError::CarFollowing {
                        vehicle: id,
                        source: KraussError::NegativeGap(l.gap),
                    });
                }
                Some(found) => Some(found),
                None => self.downstream_leader(&occ, v),
            };
            let mut links = Vec::new();
            if let Some((lid, l)) = ahead {
                links.push(HardLink { leader: lid, gap: l.gap, floor: 0.0 });
                constraints.push(Leader { gap: l.gap.max(0.0), ..l });
            }
            merges.clear();
            self.merge_constraints(&approaches, v, &mut merges);
            let d_v = self.network.edge(v.current_edge()).length - v.pos;
            for &(lid, m) in &merges {
                // the yielder may always close up to the stop line
                links.push(HardLink { leader: lid, gap: m.gap, floor: d_v });
            }

            let binding = constraints.iter().copied().min_by(|a, b| {
                safe_speed(v.speed, *a, &v.class, dt).total_cmp(&safe_speed(v.speed, *b, &v.class, dt))
            });
            let cap = self.desired_cap(v);
            let (speed, class) = (v.speed, v.class);
            let rng = &mut self.vehicles.get_mut(&id).expect("active vehicle").rng;
            let next = krauss_step(speed, &class, cap, binding, dt, rng)
                .map_err(|source| WorldError::CarFollowing { vehicle: id, source })?;
            // merge yielding is comfortable braking only
            let yield_speed = merges
                .iter()
                .map(|(_, m)| safe_speed(speed, Leader { gap: m.gap.max(0.0), ..*m }, &class, dt))
                .fold(f64::INFINITY, f64::min)
                .max(speed - class.max_decel * dt);
            let comfortable = next.max(speed - class.max_decel * dt);
            new_speeds.push(comfortable.min(yield_speed).max(0.0));
            hard_links.push(links);
        }
        resolve_gap_bounds(&ids, &hard_links, &mut new_speeds, dt);
        let mut planned: HashMap<VehicleId, f64> = ids.iter().copied().zip(new_speeds.iter().copied()).collect();

        let now_after = (self.step + 1) as f64 * dt;
        let mut outcome = StepOutcome::default();
        for i in leaders_first(&ids, &hard_links) {
            let (id, speed) = (ids[i], new_speeds[i]);
            planned.remove(&id);
            let (movement, arrived) = self.move_vehicle(&mut occ, &planned, id, speed);
            outcome.moves.push(movement);
            if arrived {
                let (edge, lane) = {
                    let v = &self.vehicles[&id];
                    (v.current_edge(), v.lane)
                };
                occ.remove(edge, lane, id);
                let mut v = self.vehicles.remove(&id).expect("active vehicle");
                v.arrive_time = Some(now_after);
                self.counters.arrived += 1;
                outcome.arrivals.push(v);
            }
        }

        for v in self.vehicles.values_mut() {
            if v.speed < STOPPED_SPEED {
                v.stopped_for += dt;
                v.longest_stop = v.longest_stop.max(v.stopped_for);
            } else {
                v.stopped_for = 0.0;
            }
            if let (DriveMode::Caution, Some(zone)) = (v.mode, v.caution) {
                let passed = (v.current_edge() == zone.edge && v.pos > zone.pos)
                    || !v.remaining_edges().contains(&zone.edge);
                if passed {
                    v.mode = DriveMode::Normal;
                    v.caution = None;
                }
            }
        }
        self.step += 1;
        Ok(outcome)
    }

    /// Moves one vehicle by `speed * dt`, crossing into downstream edges
    /// only behind where the target lane's last vehicle ends this step
    /// (`planned` holds speeds of vehicles that have not moved yet). A truncated
    /// move lowers the reported speed so displacement always equals
    /// `speed * dt`. Returns whether the vehicle reached its destination.
    fn move_vehicle(
        &mut self,
        occ: &mut Occupancy,
        planned: &HashMap<VehicleId, f64>,
        id: VehicleId,
        speed: f64,
    ) -> (Movement, bool) {
        let dt = self.settings.dt;
        let (start_edge, start_lane, start_pos, route_len) = {
            let v = &self.vehicles[&id];
            (v.current_edge(), v.lane, v.pos, v.route.edges.len())
        };
        let mut edge = start_edge;
        let mut lane = start_lane;
        let mut route_index = self.vehicles[&id].route_index;
        let mut pos = start_pos + speed * dt;
        let mut travelled = speed * dt;
        let mut segments = Vec::with_capacity(2);
        let mut seg_from = start_pos;
        let mut entered = false;
        let mut arrived = false;

        loop {
            let len = self.network.edge(edge).length;
            let last = route_index + 1 == route_len;
            if last {
                if pos >= len {
                    segments.push(Segment { edge, from: seg_from, to: len, entered });
                    arrived = true;
                    break;
                }
                segments.push(Segment { edge, from: seg_from, to: pos, entered });
                break;
            }
            if pos <= len {
                segments.push(Segment { edge, from: seg_from, to: pos, entered });
                break;
            }
            let next = self.vehicles[&id].route.edges[route_index + 1];
            let next_lane = self.mapped_lane(lane, next);
            let room = occ
                .lane(next, next_lane)
                .iter()
                .filter(|o| **o != id)
                .map(|o| {
                    let w = &self.vehicles[o];
                    // rear where w ends this step
                    let pending = planned.get(o).map_or(0.0, |s| s * dt);
                    w.pos - w.class.length + pending
                })
                .fold(f64::INFINITY, f64::min);
            if room < 0.0 {
                travelled -= pos - len;
                pos = len;
                segments.push(Segment { edge, from: seg_from, to: pos, entered });
                break;
            }
            segments.push(Segment { edge, from: seg_from, to: len, entered });
            let overflow = pos - len;
            let placed = overflow.min(room);
            travelled -= overflow - placed;
            occ.remove(edge, lane, id);
            edge = next;
            lane = next_lane;
            route_index += 1;
            pos = placed;
            seg_from = 0.0;
            entered = true;
            // keep the new edge's list sorted; the entrant is its tail
            occ.0.entry((edge, lane)).or_default().insert(0, id);
        }

        let actual_speed = if arrived { speed } else { travelled / dt };
        let v = self.vehicles.get_mut(&id).expect("active vehicle");
        v.route_index = route_index;
        v.lane = lane;
        v.pos = if arrived { self.network.edge(edge).length } else { pos };
        v.speed = actual_speed;
        v.accel = (actual_speed - v.last_speed) / dt;
        v.last_speed = actual_speed;
        (
            Movement {
                vehicle: id,
                segments,
                speed: actual_speed,
            },
            arrived,
        )
    }

    /// Forces a breakdown stop. Speed drops to 0 immediately; the drop shows
    /// up in the next step's recorded acceleration.
    pub fn force_stop(&mut self, id: VehicleId) -> bool {
        match self.vehicles.get_mut(&id) {
            Some(v) => {
                v.mode = DriveMode::BrokenDown;
                v.speed = 0.0;
                v.caution = None;
                true
            }
            None => false,
        }
    }

    /// Returns a broken-down vehicle to car-following control.
    pub fn release(&mut self, id: VehicleId) -> bool {
        match self.vehicles.get_mut(&id) {
            Some(v) if v.mode == DriveMode::BrokenDown => {
                v.mode = DriveMode::Normal;
                true
            }
            _ => false,
        }
    }

    fn comfortable_entry(&self, leader: &Vehicle, class: &VehicleClass, speed: f64) -> bool {
        let dt = self.settings.dt;
        let l = Leader {
            speed: leader.speed,
            gap: leader.pos - leader.class.length,
        };
        safe_speed(speed, l, class, dt) >= speed - class.max_decel * dt
    }

    /// Smallest bumper-to-bumper gap between consecutive vehicles sharing
    /// an edge and lane; `None` when no lane holds two vehicles.
    pub fn min_same_lane_gap(&self) -> Option<f64> {
        let occ = Occupancy::build(&self.vehicles);
        occ.0
            .values()
            .flat_map(|list| {
                list.windows(2).map(|w| {
                    let (f, l) = (&self.vehicles[&w[0]], &self.vehicles[&w[1]]);
                    l.pos - l.class.length - f.pos
                })
            })
            .min_by(f64::total_cmp)
    }
}
