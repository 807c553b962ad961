//! Journey records, per-step traces, loop detectors, deceleration statistics
//! and the CSV files they are exchanged through.
//!
//! Floats are written with Rust's shortest round-trip formatting, so any
//! aggregate recomputed from the files in row order reproduces the in-memory
//! value exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::incident::TransitionEvent;
use crate::network::{EdgeIndex, RoadNetwork, Route};
use crate::traffic::{Movement, Vehicle, VehicleClass, VehicleId, VehicleKind};
use crate::v2x::DeliveryRow;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: column {column}: {message}")]
    Field {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing column {0}")]
    MissingColumn(String),
}

pub const VEHICLES_HEADER: [&str; 8] = [
    "vehicle",
    "class",
    "depart",
    "arrive",
    "journey_time",
    "free_flow_time",
    "delay",
    "rerouted",
];
pub const TRACE_HEADER: [&str; 6] = ["t", "vehicle", "edge", "pos", "speed", "accel"];
pub const DETECTORS_HEADER: [&str; 4] = ["detector", "t", "vehicle", "speed"];
pub const MESSAGES_HEADER: [&str; 7] = ["t", "kind", "origin", "seq", "sender", "receiver", "hop_count"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JourneyRecord {
    pub vehicle: VehicleId,
    pub class: VehicleKind,
    pub depart: f64,
    pub arrive: f64,
    pub journey_time: f64,
    pub free_flow_time: f64,
    pub delay: f64,
    pub rerouted: bool,
}

impl JourneyRecord {
    /// Record for a vehicle that has arrived. Free-flow time is taken over
    /// the route actually driven.
    pub fn from_vehicle(v: &Vehicle, network: &RoadNetwork) -> Option<Self> {
        let arrive = v.arrive_time?;
        let journey_time = arrive - v.depart_time;
        let free_flow_time = free_flow_time(&v.route, network, &v.class);
        Some(Self {
            vehicle: v.id,
            class: v.class.kind,
            depart: v.depart_time,
            arrive,
            journey_time,
            free_flow_time,
            delay: journey_time - free_flow_time,
            rerouted: v.rerouted,
        })
    }
}

/// Route traversal time at `min(edge limit, class max speed)` on every edge.
pub fn free_flow_time(route: &Route, network: &RoadNetwork, class: &VehicleClass) -> f64 {
    route
        .edges
        .iter()
        .map(|&e| {
            let edge = network.edge(e);
            edge.length / edge.speed_limit.min(class.max_speed)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTraceRow {
    pub t: f64,
    pub vehicle: VehicleId,
    pub edge: EdgeIndex,
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecelStats {
    pub mean: f64,
    pub variance: f64,
    pub sample_count: u64,
}

/// Mean and population variance of `|a|` over the negative entries of
/// `accels`, summed in input order.
pub fn decel_stats<I: IntoIterator<Item = f64>>(accels: I) -> DecelStats {
    let samples: Vec<f64> = accels.into_iter().filter(|a| *a < 0.0).map(f64::abs).collect();
    if samples.is_empty() {
        return DecelStats::default();
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    DecelStats {
        mean,
        variance,
        sample_count: samples.len() as u64,
    }
}

/// Detector position as configured, by edge id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub id: String,
    pub edge: String,
    pub pos_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub id: String,
    pub edge: EdgeIndex,
    pub pos: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRecord {
    pub detector: String,
    pub t: f64,
    pub vehicle: VehicleId,
    pub speed: f64,
}

/// Counts every movement that crosses a detector during the step: the
/// detector lies in `(from, to]` of a covered segment, or in `[0, to]` of a
/// segment the vehicle entered during the step.
pub fn detector_step(moves: &[Movement], detectors: &mut [Detector], t: f64) -> Vec<DetectorRecord> {
    let mut records = Vec::new();
    for m in moves {
        for d in detectors.iter_mut() {
            let crossed = m.segments.iter().any(|s| {
                s.edge == d.edge && (s.entered || s.from < d.pos) && d.pos <= s.to
            });
            if crossed {
                d.count += 1;
                records.push(DetectorRecord {
                    detector: d.id.clone(),
                    t,
                    vehicle: m.vehicle,
                    speed: m.speed,
                });
            }
        }
    }
    records
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub t: Vec<f64>,
    pub speed: Vec<f64>,
    pub accel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StallRecord {
    pub vehicle: VehicleId,
    pub longest_stop_s: f64,
    pub arrived: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub dt_s: f64,
    pub end_time_s: f64,
    pub final_time_s: f64,
    pub steps: u64,
    pub demand: usize,
    pub inserted: usize,
    pub arrived: usize,
    pub active_at_end: usize,
    pub pending_at_end: usize,
    /// No arrivals, or vehicles left in the network at the end.
    pub incomplete: bool,
    pub mean_delay_s: f64,
    pub max_delay_s: f64,
    pub mean_journey_time_s: f64,
    pub reroute_count: usize,
    pub caution_count: usize,
    pub decel: DecelStats,
    pub detector_counts: BTreeMap<String, u64>,
    pub deliveries: BTreeMap<String, u64>,
    pub warnings_emitted: u64,
    pub resolved_emitted: u64,
    pub duplicate_handler_calls: u64,
    pub breakdown_events: Vec<TransitionEvent>,
    pub stalled: Vec<StallRecord>,
    pub profiles: BTreeMap<String, Profile>,
}

/// Delay and journey aggregates over `journeys` in order; zeros when empty.
pub fn journey_aggregates(journeys: &[JourneyRecord]) -> (f64, f64, f64) {
    if journeys.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = journeys.len() as f64;
    let mean_delay = journeys.iter().map(|j| j.delay).sum::<f64>() / n;
    let max_delay = journeys.iter().map(|j| j.delay).fold(f64::NEG_INFINITY, f64::max);
    let mean_journey = journeys.iter().map(|j| j.journey_time).sum::<f64>() / n;
    (mean_delay, max_delay, mean_journey)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

pub fn write_vehicles<W: Write>(out: W, journeys: &[JourneyRecord]) -> Result<(), MetricsError> {
    let mut w = csv_writer(out);
    w.write_record(VEHICLES_HEADER)?;
    for j in journeys {
        w.write_record([
            j.vehicle.to_string(),
            j.class.to_string(),
            j.depart.to_string(),
            j.arrive.to_string(),
            j.journey_time.to_string(),
            j.free_flow_time.to_string(),
            j.delay.to_string(),
            j.rerouted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, rows: &[StepTraceRow], network: &RoadNetwork) -> Result<(), MetricsError> {
    let mut w = csv_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.vehicle.to_string(),
            network.edge(r.edge).id.clone(),
            r.pos.to_string(),
            r.speed.to_string(),
            r.accel.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_detectors<W: Write>(out: W, rows: &[DetectorRecord]) -> Result<(), MetricsError> {
    let mut w = csv_writer(out);
    w.write_record(DETECTORS_HEADER)?;
    for r in rows {
        w.write_record([
            r.detector.clone(),
            r.t.to_string(),
            r.vehicle.to_string(),
            r.speed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_messages<W: Write>(out: W, rows: &[DeliveryRow]) -> Result<(), MetricsError> {
    let mut w = csv_writer(out);
    w.write_record(MESSAGES_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.kind.to_string(),
            r.origin.to_string(),
            r.seq.to_string(),
            r.sender.to_string(),
            r.receiver.to_string(),
            r.hop_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV file read back as named columns of strings.
pub struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read<R: Read>(input: R) -> Result<Self, MetricsError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Parses one column in row order.
    pub fn column<T: std::str::FromStr>(&self, name: &str) -> Result<Vec<T>, MetricsError>
    where
        T::Err: std::fmt::Display,
    {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MetricsError::MissingColumn(name.to_string()))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(row, rec)| {
                rec[idx].parse().map_err(|e: T::Err| MetricsError::Field {
                    row: row + 1,
                    column: name.to_string(),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}
