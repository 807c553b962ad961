// Independent reference implementations the engine is checked against.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;

use cvroute::network::{EdgeRecord, NodeRecord, RoadNetwork};

/// `(from, to, weight)` with node indices; edge `i` is named `e{i:03}`.
pub type RawEdge = (usize, usize, u32);

pub fn random_graph(rng: &mut impl Rng) -> (usize, Vec<RawEdge>) {
    let n = rng.random_range(2..=8);
    let m = rng.random_range(0..=n * (n - 1));
    let edges = (0..m)
        .filter_map(|_| {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            (a != b).then(|| (a, b, rng.random_range(1..=20)))
        })
        .collect();
    (n, edges)
}

/// Proptest counterpart of [`random_graph`].
pub fn graph() -> impl Strategy<Value = (usize, Vec<RawEdge>)> {
    (2usize..=8).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 1u32..=20).prop_filter("no self loops", |(a, b, _)| a != b);
        (Just(n), prop::collection::vec(edge, 0..=n * (n - 1)))
    })
}

/// Weight `w` becomes a `w`-meter edge at 1 m/s, so free-flow time is `w`.
pub fn build_graph(n: usize, edges: &[RawEdge]) -> RoadNetwork {
    let nodes = (0..n)
        .map(|i| NodeRecord::new(format!("n{i}"), i as f64, (i * i) as f64))
        .collect();
    let edges = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b, w))| EdgeRecord::new(format!("e{i:03}"), format!("n{a}"), format!("n{b}"), f64::from(w), 1.0, 1))
        .collect();
    RoadNetwork::build(nodes, edges).expect("random graph is valid")
}

/// Minimum cost over all node-simple paths, and the smallest edge-name
/// sequence among the paths attaining it.
pub fn brute_force(n: usize, edges: &[RawEdge], s: usize, t: usize) -> Option<(u64, Vec<String>)> {
    fn walk(
        node: usize,
        t: usize,
        edges: &[RawEdge],
        visited: &mut Vec<bool>,
        path: &mut Vec<usize>,
        cost: u64,
        best: &mut Option<(u64, Vec<String>)>,
    ) {
        if node == t {
            let names: Vec<String> = path.iter().map(|i| format!("e{i:03}")).collect();
            let better = match best {
                None => true,
                Some((c, p)) => cost < *c || (cost == *c && names < *p),
            };
            if better {
                *best = Some((cost, names));
            }
            return;
        }
        for (i, &(a, b, w)) in edges.iter().enumerate() {
            if a != node || visited[b] {
                continue;
            }
            visited[b] = true;
            path.push(i);
            walk(b, t, edges, visited, path, cost + u64::from(w), best);
            path.pop();
            visited[b] = false;
        }
    }
    if s == t {
        return None;
    }
    let mut visited = vec![false; n];
    visited[s] = true;
    let mut best = None;
    walk(s, t, edges, &mut visited, &mut Vec::new(), 0, &mut best);
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Msg {
    Start,
    Stop,
}

/// Direct interpretation of the breakdown pseudocode on a stepped clock:
/// a guard on the count, `scheduleAt(now + start, startMsg)`, and two
/// handlers that reschedule each other. A message scheduled for time `at`
/// is handled at the first step `k * dt >= at`.
pub fn breakdown_timeline(count: u32, start: f64, duration: f64, interval: f64, dt: f64, steps: u64) -> Vec<(f64, Msg)> {
    let mut breakdown_count = count;
    let mut queue: BTreeMap<u64, (f64, Msg)> = BTreeMap::new();
    let mut order = 0;
    let mut schedule_at = |q: &mut BTreeMap<u64, (f64, Msg)>, at: f64, m: Msg| {
        q.insert(order, (at, m));
        order += 1;
    };
    if breakdown_count > 0 {
        schedule_at(&mut queue, 0.0 + start, Msg::Start);
    }
    let mut trace = Vec::new();
    for k in 0..steps {
        let now = k as f64 * dt;
        let due: Vec<u64> = queue
            .iter()
            .filter(|(_, (at, _))| *at <= now + 1e-9)
            .map(|(id, _)| *id)
            .collect();
        for id in due {
            let (_, msg) = queue.remove(&id).unwrap();
            trace.push((now, msg));
            match msg {
                Msg::Start => {
                    // setSpeed(0)
                    schedule_at(&mut queue, now + duration, Msg::Stop);
                    breakdown_count -= 1;
                }
                Msg::Stop => {
                    // setSpeed(-1)
                    if breakdown_count > 0 {
                        schedule_at(&mut queue, now + interval, Msg::Start);
                    }
                }
            }
        }
    }
    trace
}
