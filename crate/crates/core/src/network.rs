//! Directed road graph with travel-time overrides and deterministic
//! Dijkstra routing.
//!
//! Edge weights are free-flow travel times (`length / speed_limit`) unless an
//! override is present. An override is either a non-negative number of
//! seconds or [`TravelTimeOverride::Blocked`], which routing treats as an
//! infinite weight. Overrides live in an [`Overrides`] map so that callers can
//! keep private views of the same physical network (one per vehicle).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing accumulated path costs.
const COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(String),
    #[error("dangling endpoint {node} in edge {edge}")]
    DanglingEndpoint { edge: String, node: String },
    #[error("invalid node {node}: {reason}")]
    InvalidNode { node: String, reason: String },
    #[error("invalid edge {edge}: {reason}")]
    InvalidEdge { edge: String, reason: String },
    #[error("unknown edge id {0}")]
    UnknownEdge(String),
    #[error("unknown node id {0}")]
    UnknownNode(String),
    #[error("invalid travel-time override {value} for edge #{}: must be >= 0", edge.0)]
    InvalidOverride { edge: EdgeIndex, value: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIndex(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeIndex(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: NodeIndex,
    pub to: NodeIndex,
    /// Meters.
    pub length: f64,
    /// Meters per second.
    pub speed_limit: f64,
    pub lanes: u32,
}

impl Edge {
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.speed_limit
    }
}

/// Unvalidated node description, as read from a network file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Unvalidated edge description, endpoints given by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub speed_limit: f64,
    pub lanes: u32,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Self { id: id.into(), x, y }
    }
}

impl EdgeRecord {
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length: f64,
        speed_limit: f64,
        lanes: u32,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
            speed_limit,
            lanes,
        }
    }
}

/// Replacement travel time for one edge. Serialized as a number of seconds
/// or the string `"blocked"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TravelTimeOverride {
    Seconds(f64),
    Blocked,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OverrideRepr {
    Seconds(f64),
    Text(String),
}

impl Serialize for TravelTimeOverride {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            TravelTimeOverride::Seconds(v) => OverrideRepr::Seconds(v),
            TravelTimeOverride::Blocked => OverrideRepr::Text("blocked".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TravelTimeOverride {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match OverrideRepr::deserialize(d)? {
            OverrideRepr::Seconds(v) if v.is_finite() && v >= 0.0 => {
                Ok(TravelTimeOverride::Seconds(v))
            }
            OverrideRepr::Seconds(v) => Err(serde::de::Error::custom(format!(
                "travel-time override must be >= 0 seconds, got {v}"
            ))),
            OverrideRepr::Text(t) if t == "blocked" => Ok(TravelTimeOverride::Blocked),
            OverrideRepr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number of seconds or \"blocked\", got \"{t}\""
            ))),
        }
    }
}

impl TravelTimeOverride {
    /// Routing weight; `Blocked` maps to `+inf`.
    pub fn weight(self) -> f64 {
        match self {
            TravelTimeOverride::Seconds(s) => s,
            TravelTimeOverride::Blocked => f64::INFINITY,
        }
    }

    pub fn is_valid(self) -> bool {
        match self {
            TravelTimeOverride::Seconds(s) => s.is_finite() && s >= 0.0,
            TravelTimeOverride::Blocked => true,
        }
    }
}

impl fmt::Display for TravelTimeOverride {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TravelTimeOverride::Seconds(s) => write!(f, "{s}"),
            TravelTimeOverride::Blocked => f.write_str("blocked"),
        }
    }
}

/// Per-edge travel-time overrides. Ordered so iteration is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides(BTreeMap<EdgeIndex, TravelTimeOverride>);

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous override, if any. Negative values are rejected.
    pub fn insert(
        &mut self,
        edge: EdgeIndex,
        value: TravelTimeOverride,
    ) -> Result<Option<TravelTimeOverride>, NetworkError> {
        if !value.is_valid() {
            return Err(NetworkError::InvalidOverride {
                edge,
                value: value.weight(),
            });
        }
        Ok(self.0.insert(edge, value))
    }

    pub fn remove(&mut self, edge: EdgeIndex) -> Option<TravelTimeOverride> {
        self.0.remove(&edge)
    }

    pub fn get(&self, edge: EdgeIndex) -> Option<TravelTimeOverride> {
        self.0.get(&edge).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeIndex, TravelTimeOverride)> + '_ {
        self.0.iter().map(|(e, o)| (*e, *o))
    }
}

/// A connected sequence of edges from `origin` to `destination`.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub edges: Vec<EdgeIndex>,
    pub origin: NodeIndex,
    pub destination: NodeIndex,
}

impl Route {
    /// Checks non-emptiness and endpoint continuity against `network`.
    pub fn is_connected(&self, network: &RoadNetwork) -> bool {
        let (Some(first), Some(last)) = (self.edges.first(), self.edges.last()) else {
            return false;
        };
        network.edge(*first).from == self.origin
            && network.edge(*last).to == self.destination
            && self
                .edges
                .windows(2)
                .all(|w| network.edge(w[0]).to == network.edge(w[1]).from)
    }

    pub fn edge_ids<'a>(&'a self, network: &'a RoadNetwork) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().map(move |e| network.edge(*e).id.as_str())
    }

    pub fn contains(&self, edge: EdgeIndex) -> bool {
        self.edges.contains(&edge)
    }
}

/// A route together with its total weight under the overrides it was
/// computed with.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPath {
    pub route: Route,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_lookup: HashMap<String, NodeIndex>,
    edge_lookup: HashMap<String, EdgeIndex>,
    outgoing: Vec<Vec<EdgeIndex>>,
    incoming: Vec<Vec<EdgeIndex>>,
    /// Network-wide overrides used by [`RoadNetwork::shortest_path`].
    pub overrides: Overrides,
}

fn valid_token(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c.is_whitespace() || c == '#')
}

impl RoadNetwork {
    pub fn build(
        node_records: Vec<NodeRecord>,
        edge_records: Vec<EdgeRecord>,
    ) -> Result<Self, NetworkError> {
        let mut nodes = Vec::with_capacity(node_records.len());
        let mut node_lookup = HashMap::new();
        for rec in node_records {
            if !valid_token(&rec.id) {
                return Err(NetworkError::InvalidNode {
                    node: rec.id,
                    reason: "id must be a non-empty token without whitespace or '#'".into(),
                });
            }
            if !rec.x.is_finite() || !rec.y.is_finite() {
                return Err(NetworkError::InvalidNode {
                    node: rec.id,
                    reason: "coordinates must be finite".into(),
                });
            }
            if node_lookup.contains_key(&rec.id) {
                return Err(NetworkError::DuplicateNode(rec.id));
            }
            node_lookup.insert(rec.id.clone(), NodeIndex(nodes.len()));
            nodes.push(Node {
                id: rec.id,
                x: rec.x,
                y: rec.y,
            });
        }

        let mut edges = Vec::with_capacity(edge_records.len());
        let mut edge_lookup = HashMap::new();
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for rec in edge_records {
            let invalid = |reason: &str| NetworkError::InvalidEdge {
                edge: rec.id.clone(),
                reason: reason.into(),
            };
            if !valid_token(&rec.id) {
                return Err(invalid(
                    "id must be a non-empty token without whitespace or '#'",
                ));
            }
            if edge_lookup.contains_key(&rec.id) {
                return Err(NetworkError::DuplicateEdge(rec.id));
            }
            let endpoint = |id: &str| {
                node_lookup
                    .get(id)
                    .copied()
                    .ok_or_else(|| NetworkError::DanglingEndpoint {
                        edge: rec.id.clone(),
                        node: id.to_string(),
                    })
            };
            let from = endpoint(&rec.from)?;
            let to = endpoint(&rec.to)?;
            if from == to {
                return Err(invalid("from and to must differ"));
            }
            if !(rec.length.is_finite() && rec.length > 0.0) {
                return Err(invalid("length must be positive"));
            }
            if !(rec.speed_limit.is_finite() && rec.speed_limit > 0.0) {
                return Err(invalid("speed limit must be positive"));
            }
            if rec.lanes == 0 {
                return Err(invalid("lane count must be at least 1"));
            }
            let index = EdgeIndex(edges.len());
            outgoing[from.0].push(index);
            incoming[to.0].push(index);
            edge_lookup.insert(rec.id.clone(), index);
            edges.push(Edge {
                id: rec.id,
                from,
                to,
                length: rec.length,
                speed_limit: rec.speed_limit,
                lanes: rec.lanes,
            });
        }

        Ok(Self {
            nodes,
            edges,
            node_lookup,
            edge_lookup,
            outgoing,
            incoming,
            overrides: Overrides::new(),
        })
    }

    /// Parses the line-oriented network format:
    ///
    /// ```text
    /// # comment
    /// NODE <id> <x> <y>
    /// EDGE <id> <from> <to> <length_m> <speed_limit_mps> <lanes>
    /// ```
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(&kind) = fields.first() else {
                continue;
            };
            let err = |message: String| NetworkError::Parse {
                line: line_no,
                message,
            };
            let float = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| err(format!("invalid {what} '{s}'")))
            };
            match kind {
                "NODE" => {
                    if fields.len() != 4 {
                        return Err(err(format!(
                            "NODE expects 3 fields, found {}",
                            fields.len() - 1
                        )));
                    }
                    nodes.push(NodeRecord {
                        id: fields[1].to_string(),
                        x: float(fields[2], "x")?,
                        y: float(fields[3], "y")?,
                    });
                }
                "EDGE" => {
                    if fields.len() != 7 {
                        return Err(err(format!(
                            "EDGE expects 6 fields, found {}",
                            fields.len() - 1
                        )));
                    }
                    let lanes = fields[6]
                        .parse::<u32>()
                        .map_err(|_| err(format!("invalid lanes '{}'", fields[6])))?;
                    edges.push(EdgeRecord {
                        id: fields[1].to_string(),
                        from: fields[2].to_string(),
                        to: fields[3].to_string(),
                        length: float(fields[4], "length")?,
                        speed_limit: float(fields[5], "speed limit")?,
                        lanes,
                    });
                }
                other => return Err(err(format!("unknown record type '{other}'"))),
            }
        }
        Self::build(nodes, edges)
    }

    /// Serializes to the text format accepted by [`RoadNetwork::parse`].
    /// Overrides are runtime state and are not written.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = writeln!(out, "NODE {} {} {}", n.id, n.x, n.y);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "EDGE {} {} {} {} {} {}",
                e.id,
                self.nodes[e.from.0].id,
                self.nodes[e.to.0].id,
                e.length,
                e.speed_limit,
                e.lanes
            );
        }
        out
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, index: NodeIndex) -> &Node {
        &self.nodes[index.0]
    }

    pub fn edge(&self, index: EdgeIndex) -> &Edge {
        &self.edges[index.0]
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIndex> {
        self.node_lookup.get(id).copied()
    }

    pub fn edge_index(&self, id: &str) -> Option<EdgeIndex> {
        self.edge_lookup.get(id).copied()
    }

    pub fn require_node(&self, id: &str) -> Result<NodeIndex, NetworkError> {
        self.node_index(id)
            .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
    }

    pub fn require_edge(&self, id: &str) -> Result<EdgeIndex, NetworkError> {
        self.edge_index(id)
            .ok_or_else(|| NetworkError::UnknownEdge(id.to_string()))
    }

    /// Outgoing edges of `node`, in insertion order.
    pub fn outgoing(&self, node: NodeIndex) -> &[EdgeIndex] {
        &self.outgoing[node.0]
    }

    pub fn incoming(&self, node: NodeIndex) -> &[EdgeIndex] {
        &self.incoming[node.0]
    }

    /// Routing weight of `edge` under `overrides`: the override when present,
    /// free-flow time otherwise. `Blocked` yields `+inf`.
    pub fn weight_with(&self, overrides: &Overrides, edge: EdgeIndex) -> f64 {
        match overrides.get(edge) {
            Some(o) => o.weight(),
            None => self.edges[edge.0].free_flow_time(),
        }
    }

    /// Travel time of the edge named `edge_id` under the network-wide overrides.
    pub fn effective_travel_time(&self, edge_id: &str) -> Result<f64, NetworkError> {
        let edge = self.require_edge(edge_id)?;
        Ok(self.weight_with(&self.overrides, edge))
    }

    pub fn route_cost(&self, overrides: &Overrides, edges: &[EdgeIndex]) -> f64 {
        edges.iter().map(|e| self.weight_with(overrides, *e)).sum()
    }

    /// Planar coordinates of a point `pos` meters along `edge`, linearly
    /// interpolated between the endpoint nodes.
    pub fn position_on_edge(&self, edge: EdgeIndex, pos: f64) -> (f64, f64) {
        let e = &self.edges[edge.0];
        let a = &self.nodes[e.from.0];
        let b = &self.nodes[e.to.0];
        let f = (pos / e.length).clamp(0.0, 1.0);
        (a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
    }

    /// Shortest path between two node ids using the network-wide overrides.
    ///
    /// Returns `Ok(None)` when the destination is unreachable over finite
    /// weights (or equals the origin); unknown ids are errors.
    pub fn shortest_path(&self, from: &str, to: &str) -> Result<Option<ShortestPath>, NetworkError> {
        let from = self.require_node(from)?;
        let to = self.require_node(to)?;
        Ok(self.shortest_path_with(&self.overrides, from, to))
    }

    /// Dijkstra over `overrides`. Among equal-cost paths the one whose
    /// edge-id sequence is lexicographically smallest is returned.
    pub fn shortest_path_with(
        &self,
        overrides: &Overrides,
        from: NodeIndex,
        to: NodeIndex,
    ) -> Option<ShortestPath> {
        if from == to {
            return None;
        }
        let forward = self.dijkstra(overrides, from, Direction::Forward);
        let total = forward[to.0];
        if !total.is_finite() {
            return None;
        }
        let to_target = self.dijkstra(overrides, to, Direction::Backward);

        let tol = COST_TOLERANCE * total.abs().max(1.0);
        let mut visited = vec![false; self.nodes.len()];
        let mut path = Vec::new();
        visited[from.0] = true;
        let found = self.smallest_tight_path(
            overrides,
            from,
            to,
            0.0,
            total,
            tol,
            &to_target,
            &mut visited,
            &mut path,
        );
        debug_assert!(found, "a finite shortest path must be reconstructible");
        if !found {
            return None;
        }
        let cost = self.route_cost(overrides, &path);
        Some(ShortestPath {
            route: Route {
                edges: path,
                origin: from,
                destination: to,
            },
            cost,
        })
    }

    /// Depth-first walk over edges that lie on some minimum-cost path,
    /// trying candidates in edge-id order. Backtracking only matters when
    /// zero-weight overrides create cycles of tight edges.
    #[allow(clippy::too_many_arguments)]
    fn smallest_tight_path(
        &self,
        overrides: &Overrides,
        node: NodeIndex,
        target: NodeIndex,
        acc: f64,
        total: f64,
        tol: f64,
        to_target: &[f64],
        visited: &mut [bool],
        path: &mut Vec<EdgeIndex>,
    ) -> bool {
        if node == target {
            return true;
        }
        let mut candidates: Vec<(EdgeIndex, f64)> = self.outgoing[node.0]
            .iter()
            .filter_map(|&e| {
                let w = self.weight_with(overrides, e);
                let next = self.edges[e.0].to;
                let through = acc + w + to_target[next.0];
                (w.is_finite() && !visited[next.0] && (through - total).abs() <= tol)
                    .then_some((e, w))
            })
            .collect();
        candidates.sort_by(|a, b| self.edges[a.0 .0].id.cmp(&self.edges[b.0 .0].id));
        for (e, w) in candidates {
            let next = self.edges[e.0].to;
            visited[next.0] = true;
            path.push(e);
            if self.smallest_tight_path(
                overrides, next, target, acc + w, total, tol, to_target, visited, path,
            ) {
                return true;
            }
            path.pop();
            visited[next.0] = false;
        }
        false
    }

    fn dijkstra(&self, overrides: &Overrides, source: NodeIndex, dir: Direction) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source.0] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            node: source,
        });
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if cost > dist[node.0] {
                continue;
            }
            let adjacent = match dir {
                Direction::Forward => &self.outgoing[node.0],
                Direction::Backward => &self.incoming[node.0],
            };
            for &e in adjacent {
                let w = self.weight_with(overrides, e);
                if !w.is_finite() {
                    continue;
                }
                let edge = &self.edges[e.0];
                let next = match dir {
                    Direction::Forward => edge.to,
                    Direction::Backward => edge.from,
                };
                let candidate = cost + w;
                if candidate < dist[next.0] {
                    dist[next.0] = candidate;
                    heap.push(HeapEntry {
                        cost: candidate,
                        node: next,
                    });
                }
            }
        }
        dist
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    node: NodeIndex,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
