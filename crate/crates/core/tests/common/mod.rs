// Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

pub mod oracle;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvroute::incident::BreakdownSchedule;
use cvroute::network::RoadNetwork;
use cvroute::rerouting::ReroutingConfig;
use cvroute::scenario::builtin_network;
use cvroute::traffic::{DemandEntry, DemandSpec, DriveMode, VehicleId, VehicleKind};
use cvroute::{Simulation, SimulationConfig};

/// A randomized scenario: network, demand and engine settings.
pub struct RandomRun {
    pub network: RoadNetwork,
    pub demand: DemandSpec,
    pub config: SimulationConfig,
}

impl RandomRun {
    pub fn simulation(&self) -> Simulation {
        Simulation::new(self.network.clone(), &self.demand, self.config.clone()).expect("valid random run")
    }
}

/// Corridor S → A → B → E with random lane counts (lane drops and adds),
/// speed limits and lengths.
pub fn random_corridor(rng: &mut impl Rng) -> RoadNetwork {
    let mut text = String::new();
    let mut x = 0.0;
    let names = ["S", "A", "B", "E"];
    let mut lengths = Vec::new();
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            let len: f64 = rng.random_range(300.0..1500.0);
            x += len;
            lengths.push(len);
        }
        text.push_str(&format!("NODE {n} {x} 0\n"));
    }
    for i in 0..3 {
        let limit: f64 = rng.random_range(13.9..26.8224);
        let lanes: u32 = rng.random_range(1..=3);
        text.push_str(&format!(
            "EDGE {0}_{1} {0} {1} {2} {limit} {lanes}\n",
            names[i],
            names[i + 1],
            lengths[i]
        ));
    }
    RoadNetwork::parse(&text).expect("generated corridor parses")
}

/// Demand S → E: part uniform over the horizon, part in bursts that
/// saturate the entry.
pub fn random_demand(rng: &mut impl Rng, total: u32, horizon: f64) -> DemandSpec {
    let bursts: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..horizon * 0.8)).collect();
    let entries = (0..total)
        .map(|i| {
            let depart = if rng.random_bool(0.5) {
                rng.random_range(0.0..horizon)
            } else {
                bursts[rng.random_range(0..bursts.len())] + rng.random_range(0.0..60.0)
            };
            DemandEntry {
                id: VehicleId(i),
                kind: if rng.random_bool(0.8) {
                    VehicleKind::Passenger
                } else {
                    VehicleKind::Hgv
                },
                depart,
                origin: "S".into(),
                destination: "E".into(),
            }
        })
        .collect();
    DemandSpec::new(entries).expect("generated demand is valid")
}

/// Randomized run of exactly `steps` steps: the last departure is late
/// enough that the network is never empty before the end.
pub fn random_run(seed: u64, steps: u64) -> RandomRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = match rng.random_range(0..3) {
        0 => builtin_network("junction").unwrap(),
        1 => builtin_network("midlink").unwrap(),
        _ => random_corridor(&mut rng),
    };
    let dt = if rng.random_bool(0.8) { 1.0 } else { 0.5 };
    let end = steps as f64 * dt;
    let total = rng.random_range(150..=500);
    let mut demand = random_demand(&mut rng, total, end - 200.0);
    let mut entries = demand.entries().to_vec();
    // keeps the network busy up to the end
    entries.push(DemandEntry {
        id: VehicleId(total),
        kind: VehicleKind::Hgv,
        depart: end - 10.0,
        origin: "S".into(),
        destination: "E".into(),
    });
    demand = DemandSpec::new(entries).unwrap();

    let count = rng.random_range(1..=3);
    let mut breakdown = BreakdownSchedule::new(
        VehicleId(rng.random_range(0..total)),
        count,
        rng.random_range(0.0..end / 2.0),
        rng.random_range(30.0..900.0),
        rng.random_range(10.0..900.0),
    );
    if rng.random_bool(0.5) {
        breakdown.target = None;
        breakdown.random = true;
    }
    let config = SimulationConfig {
        name: format!("random-{seed}"),
        seed,
        dt,
        end_time: end,
        breakdown: Some(breakdown),
        rerouting: ReroutingConfig {
            enabled: rng.random_bool(0.5),
            ..ReroutingConfig::default()
        },
        trace: false,
        ..SimulationConfig::default()
    };
    RandomRun {
        network,
        demand,
        config,
    }
}

#[derive(Debug, Clone, Copy)]
struct Prev {
    speed: f64,
    route_index: usize,
    pos: f64,
    mode: DriveMode,
}

/// A forced stop: `(time, edge, position)`.
type ForcedStop = (f64, cvroute::network::EdgeIndex, f64);

/// How far upstream, and for how long, followers of a forced stop may brake
/// harder than max_decel: a leader that drops from full speed to zero
/// leaves them less than the comfortable stopping distance.
pub const SHADOW_M: f64 = 200.0;
pub const SHADOW_S: f64 = 30.0;

/// Per-step invariant checks over a running simulation.
#[derive(Debug, Default)]
pub struct Checker {
    prev: HashMap<VehicleId, Prev>,
    stops: Vec<ForcedStop>,
    /// Hard braking inside a forced stop's shadow.
    pub shadow_braking: u64,
    pub steps: u64,
    pub negative_gaps: u64,
    pub min_gap: f64,
    pub violations: Vec<String>,
}

impl Checker {
    pub fn new() -> Self {
        Self {
            min_gap: f64::INFINITY,
            ..Self::default()
        }
    }

    fn fail(&mut self, msg: String) {
        if self.violations.len() < 20 {
            self.violations.push(msg);
        }
    }

    /// Checks the state reached by the step just taken.
    pub fn observe(&mut self, sim: &Simulation, demand_len: usize) {
        self.steps += 1;
        let world = sim.world();
        let t = world.time();
        let dt = world.dt();
        if let Some(g) = world.min_same_lane_gap() {
            self.min_gap = self.min_gap.min(g);
            if g < 0.0 {
                self.negative_gaps += 1;
                self.fail(format!("t={t}: negative gap {g}"));
            }
        }
        let c = world.counters();
        if c.inserted != c.arrived + c.removed + world.active_count() {
            self.fail(format!("t={t}: conservation {c:?} active {}", world.active_count()));
        }
        if world.pending_count() + c.inserted != demand_len {
            self.fail(format!("t={t}: pending {} + inserted {} != demand", world.pending_count(), c.inserted));
        }
        if let Some(state) = sim.incident() {
            if !cvroute::incident::is_consistent(state, world) {
                self.fail(format!("t={t}: active breakdown target is moving"));
            }
        }

        for v in world.vehicles() {
            let was_down = self.prev.get(&v.id).is_some_and(|p| p.mode == DriveMode::BrokenDown);
            if v.mode == DriveMode::BrokenDown && !was_down {
                self.stops.push((t, v.current_edge(), v.pos));
            }
        }
        let mut next = HashMap::with_capacity(self.prev.len());
        let mut problems = Vec::new();
        for v in world.vehicles() {
            let len = world.network().edge(v.current_edge()).length;
            if !(0.0..=len).contains(&v.pos) {
                problems.push(format!("t={t}: vehicle {} pos {} outside [0, {len}]", v.id, v.pos));
            }
            if !(0.0..=v.class.max_speed).contains(&v.speed) {
                problems.push(format!("t={t}: vehicle {} speed {}", v.id, v.speed));
            }
            if v.mode == DriveMode::BrokenDown && v.speed != 0.0 {
                problems.push(format!("t={t}: broken-down vehicle {} moving", v.id));
            }
            if let Some(p) = self.prev.get(&v.id) {
                let dv = v.speed - p.speed;
                let forced = v.mode == DriveMode::BrokenDown && p.mode != DriveMode::BrokenDown;
                let lo = -v.class.max_decel * dt - 1e-9;
                let hi = v.class.max_accel * dt + 1e-9;
                let shadowed = dv < lo && !forced && self.in_shadow(sim, v, t);
                if shadowed {
                    self.shadow_braking += 1;
                }
                if dv > hi || (dv < lo && !forced && !shadowed) {
                    problems.push(format!("t={t}: vehicle {} speed change {dv}", v.id));
                }
                let mut travelled = -p.pos;
                for &e in &v.route.edges[p.route_index..v.route_index] {
                    travelled += world.network().edge(e).length;
                }
                travelled += v.pos;
                if (travelled - v.speed * dt).abs() > 1e-6 {
                    problems.push(format!(
                        "t={t}: vehicle {} moved {travelled} at speed {}",
                        v.id, v.speed
                    ));
                }
            }
            next.insert(
                v.id,
                Prev {
                    speed: v.speed,
                    route_index: v.route_index,
                    pos: v.pos,
                    mode: v.mode,
                },
            );
        }
        for p in problems {
            self.fail(p);
        }
        self.prev = next;
    }
}

impl Checker {
    fn in_shadow(&self, sim: &Simulation, v: &cvroute::traffic::Vehicle, t: f64) -> bool {
        let net = sim.world().network();
        self.stops.iter().any(|&(ts, edge, pos)| {
            if t - ts > SHADOW_S + 1e-9 {
                return false;
            }
            let mut dist = -v.pos;
            for &e in v.remaining_edges() {
                if e == edge {
                    dist += pos;
                    return (0.0..=SHADOW_M).contains(&dist);
                }
                dist += net.edge(e).length;
            }
            false
        })
    }
}

/// Runs to completion under the checker.
pub fn run_checked(run: &RandomRun) -> Checker {
    let mut sim = run.simulation();
    let mut checker = Checker::new();
    while !sim.is_finished() {
        sim.step().expect("step succeeds");
        checker.observe(&sim, run.demand.len());
    }
    checker
}

/// One passenger car on a 50 km road, alone for the whole run: breakdown
/// transitions always find their target.
pub fn lone_vehicle_run(schedule: BreakdownSchedule, dt: f64, end: f64) -> RandomRun {
    let network = RoadNetwork::parse("NODE A 0 0\nNODE B 50000 0\nEDGE AB A B 50000 20 1\n").unwrap();
    let demand = DemandSpec::new(vec![DemandEntry {
        id: VehicleId(0),
        kind: VehicleKind::Passenger,
        depart: 0.0,
        origin: "A".into(),
        destination: "B".into(),
    }])
    .unwrap();
    let config = SimulationConfig {
        name: "lone".into(),
        dt,
        end_time: end,
        breakdown: Some(schedule),
        ..SimulationConfig::default()
    };
    RandomRun {
        network,
        demand,
        config,
    }
}

/// Engine transitions of a lone-vehicle run next to the pseudocode oracle's.
pub fn transitions_vs_oracle(
    count: u32,
    start: f64,
    duration: f64,
    interval: f64,
    dt: f64,
) -> (Vec<(f64, oracle::Msg)>, Vec<(f64, oracle::Msg)>) {
    use cvroute::incident::TransitionKind;
    let end = 2400.0;
    let run = lone_vehicle_run(
        BreakdownSchedule::new(VehicleId(0), count, start, duration, interval),
        dt,
        end,
    );
    let mut sim = run.simulation();
    while !sim.is_finished() {
        sim.step().unwrap();
    }
    let engine = sim
        .incident()
        .unwrap()
        .events
        .iter()
        .map(|e| {
            assert!(e.applied);
            let m = match e.kind {
                TransitionKind::Start => oracle::Msg::Start,
                TransitionKind::Stop => oracle::Msg::Stop,
            };
            (e.t, m)
        })
        .collect();
    let steps = (end / dt).round() as u64;
    (engine, oracle::breakdown_timeline(count, start, duration, interval, dt, steps))
}
