//! Vehicle demand: explicit schedules from a file or a seeded generator.
//!
//! File format, one record per line (`#` starts a comment):
//!
//! ```text
//! VEH <id> <PASSENGER|HGV> <depart_s> <origin_node> <dest_node>
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::class::VehicleKind;
use super::VehicleId;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate vehicle id {0}")]
    DuplicateVehicle(VehicleId),
    #[error("vehicle {0}: departure time must be finite and >= 0")]
    BadDeparture(VehicleId),
    #[error("invalid demand generator: {0}")]
    Generator(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandEntry {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub depart: f64,
    pub origin: String,
    pub destination: String,
}

/// Departure schedule sorted by `(depart, id)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandSpec {
    entries: Vec<DemandEntry>,
}

/// Inline demand: `total` vehicles departing at even spacing over
/// `[depart_start_s, depart_end_s)`, with exactly
/// `round(total * passenger_fraction)` passenger cars placed by a seeded
/// shuffle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandGenerator {
    pub total: u32,
    #[serde(default = "default_passenger_fraction")]
    pub passenger_fraction: f64,
    #[serde(default)]
    pub depart_start_s: f64,
    pub depart_end_s: f64,
    pub origin: String,
    pub destination: String,
}

fn default_passenger_fraction() -> f64 {
    0.8
}

impl DemandGenerator {
    pub fn generate(&self, seed: u64) -> Result<DemandSpec, DemandError> {
        if !(0.0..=1.0).contains(&self.passenger_fraction) {
            return Err(DemandError::Generator(
                "passenger_fraction must lie in [0, 1]".into(),
            ));
        }
        if !(self.depart_start_s >= 0.0 && self.depart_end_s >= self.depart_start_s) {
            return Err(DemandError::Generator(
                "departure window must satisfy 0 <= start <= end".into(),
            ));
        }
        let total = self.total as usize;
        let passengers = (self.total as f64 * self.passenger_fraction).round() as usize;
        let mut kinds: Vec<VehicleKind> = (0..total)
            .map(|i| {
                if i < passengers {
                    VehicleKind::Passenger
                } else {
                    VehicleKind::Hgv
                }
            })
            .collect();
        kinds.shuffle(&mut stream_rng(seed, Stream::Demand, 0));

        let spacing = if total == 0 {
            0.0
        } else {
            (self.depart_end_s - self.depart_start_s) / total as f64
        };
        let entries = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| DemandEntry {
                id: VehicleId(i as u32),
                kind,
                depart: self.depart_start_s + spacing * i as f64,
                origin: self.origin.clone(),
                destination: self.destination.clone(),
            })
            .collect();
        DemandSpec::new(entries)
    }
}

impl DemandSpec {
    pub fn new(mut entries: Vec<DemandEntry>) -> Result<Self, DemandError> {
        let mut ids = HashSet::new();
        for e in &entries {
            if !(e.depart.is_finite() && e.depart >= 0.0) {
                return Err(DemandError::BadDeparture(e.id));
            }
            if !ids.insert(e.id) {
                return Err(DemandError::DuplicateVehicle(e.id));
            }
        }
        entries.sort_by(|a, b| a.depart.total_cmp(&b.depart).then(a.id.cmp(&b.id)));
        Ok(Self { entries })
    }

    pub fn parse(text: &str) -> Result<Self, DemandError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |message: String| DemandError::Parse {
                line: i + 1,
                message,
            };
            if fields[0] != "VEH" {
                return Err(err(format!("unknown record type '{}'", fields[0])));
            }
            if fields.len() != 6 {
                return Err(err(format!("VEH expects 5 fields, found {}", fields.len() - 1)));
            }
            let id = fields[1]
                .parse::<u32>()
                .map_err(|_| err(format!("invalid vehicle id '{}'", fields[1])))?;
            let kind = fields[2].parse::<VehicleKind>().map_err(err)?;
            let depart = fields[3]
                .parse::<f64>()
                .map_err(|_| err(format!("invalid departure '{}'", fields[3])))?;
            entries.push(DemandEntry {
                id: VehicleId(id),
                kind,
                depart,
                origin: fields[4].to_string(),
                destination: fields[5].to_string(),
            });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "VEH {} {} {} {} {}",
                e.id, e.kind, e.depart, e.origin, e.destination
            );
        }
        out
    }

    pub fn entries(&self) -> &[DemandEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, kind: VehicleKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator() -> DemandGenerator {
        DemandGenerator {
            total: 400,
            passenger_fraction: 0.8,
            depart_start_s: 0.0,
            depart_end_s: 1000.0,
            origin: "S".into(),
            destination: "E".into(),
        }
    }

    #[test]
    fn split_is_exact() {
        let d = generator().generate(1).unwrap();
        assert_eq!(d.len(), 400);
        assert_eq!(d.count(VehicleKind::Passenger), 320);
        assert_eq!(d.count(VehicleKind::Hgv), 80);
        assert_eq!(d.entries()[0].depart, 0.0);
        assert_eq!(d.entries()[1].depart, 2.5);
    }

    #[test]
    fn seed_changes_only_class_order() {
        let a = generator().generate(1).unwrap();
        let b = generator().generate(2).unwrap();
        assert_eq!(a, generator().generate(1).unwrap());
        assert_ne!(a, b);
        assert!(a
            .entries()
            .iter()
            .zip(b.entries())
            .all(|(x, y)| x.depart == y.depart && x.id == y.id));
    }

    #[test]
    fn file_round_trip_and_sorting() {
        let text = "# demand\nVEH 2 HGV 5 A B\nVEH 1 PASSENGER 5 A B\nVEH 0 PASSENGER 0.5 A B\n";
        let d = DemandSpec::parse(text).unwrap();
        let ids: Vec<u32> = d.entries().iter().map(|e| e.id.0).collect();
        assert_eq!(ids, [0, 1, 2]);
        assert_eq!(DemandSpec::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_records() {
        assert!(matches!(
            DemandSpec::parse("VEH 1 BUS 0 A B"),
            Err(DemandError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            DemandSpec::parse("VEH 1 HGV -1 A B"),
            Err(DemandError::BadDeparture(_))
        ));
        assert!(matches!(
            DemandSpec::parse("VEH 1 HGV 0 A B\nVEH 1 HGV 2 A B"),
            Err(DemandError::DuplicateVehicle(_))
        ));
    }
}
