//! Idealized V2V broadcast: unit-disk delivery, periodic beacons and
//! flooding of breakdown messages with duplicate suppression.
//!
//! A relay decided while draining inboxes at step `t` goes on air at step
//! `t + dt`, from the relaying vehicle's position at that time. The hop count
//! carried on air is the sender's own hop count plus one; the originator
//! holds hop 0.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::EdgeIndex;
use crate::traffic::VehicleId;

pub type Position = (f64, f64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum V2xError {
    #[error("unknown or inactive sender {0}")]
    UnknownSender(VehicleId),
    #[error("invalid comm config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommConfig {
    pub beacon_interval_s: f64,
    pub range_m: f64,
    /// Recorded only.
    pub tx_power_mw: f64,
    /// Recorded only.
    pub antenna_height_m: f64,
    pub packet_size_bytes: u32,
    /// Upper bound on the on-air hop count of relayed copies. Unlimited when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_hops: Option<u32>,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            beacon_interval_s: 1.0,
            range_m: 300.0,
            tx_power_mw: 20.0,
            antenna_height_m: 1.895,
            packet_size_bytes: 1024,
            max_hops: None,
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<(), V2xError> {
        if !(self.beacon_interval_s > 0.0 && self.beacon_interval_s.is_finite()) {
            return Err(V2xError::Config("beacon_interval_s must be > 0".into()));
        }
        if !(self.range_m > 0.0 && self.range_m.is_finite()) {
            return Err(V2xError::Config("range_m must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Beacon,
    BreakdownWarning,
    BreakdownResolved,
}

impl MessageKind {
    pub fn relays(self) -> bool {
        self != MessageKind::Beacon
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::Beacon => "beacon",
            MessageKind::BreakdownWarning => "warning",
            MessageKind::BreakdownResolved => "resolved",
        })
    }
}

impl std::str::FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beacon" => Ok(MessageKind::Beacon),
            "warning" => Ok(MessageKind::BreakdownWarning),
            "resolved" => Ok(MessageKind::BreakdownResolved),
            other => Err(format!("unknown message kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownLocation {
    pub vehicle: VehicleId,
    pub edge: EdgeIndex,
    pub pos: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Kinematics { speed: f64, accel: f64 },
    Breakdown(BreakdownLocation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageKey {
    pub origin: VehicleId,
    pub kind: MessageKind,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct V2xMessage {
    pub kind: MessageKind,
    pub origin: VehicleId,
    pub seq: u64,
    pub sent_at: f64,
    pub sender: VehicleId,
    pub sender_position: Position,
    pub payload: Payload,
    pub hop_count: u32,
}

impl V2xMessage {
    pub fn key(&self) -> MessageKey {
        MessageKey {
            origin: self.origin,
            kind: self.kind,
            seq: self.seq,
        }
    }
}

/// One row of `messages.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRow {
    pub t: f64,
    pub kind: MessageKind,
    pub origin: VehicleId,
    pub seq: u64,
    pub sender: VehicleId,
    pub receiver: VehicleId,
    pub hop_count: u32,
}

pub fn in_range(a: Position, b: Position, config: &CommConfig) -> bool {
    (a.0 - b.0).hypot(a.1 - b.1) <= config.range_m
}

/// Whether `elapsed` is a nonnegative whole multiple of `interval`, allowing
/// for accumulated floating-point error.
pub fn on_period(elapsed: f64, interval: f64) -> bool {
    if elapsed < -1e-9 {
        return false;
    }
    let k = (elapsed / interval).round();
    (elapsed - k * interval).abs() <= 1e-9 * interval.max(1.0)
}

/// Snapshot of active vehicles for one communication phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub id: VehicleId,
    pub position: Position,
    pub depart_time: f64,
    pub speed: f64,
    pub accel: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Channel {
    config: CommConfig,
    log_beacons: bool,
    inboxes: BTreeMap<VehicleId, Vec<V2xMessage>>,
    seen: HashMap<VehicleId, HashSet<MessageKey>>,
    pending_relays: Vec<V2xMessage>,
    seqs: HashMap<(VehicleId, MessageKind), u64>,
    log: Vec<DeliveryRow>,
    deliveries: BTreeMap<MessageKind, u64>,
}

impl Channel {
    pub fn new(config: CommConfig, log_beacons: bool) -> Self {
        Self {
            config,
            log_beacons,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &CommConfig {
        &self.config
    }

    /// Delivers `message` to every other station within range of the
    /// sender's position, returning the receivers in ascending id order.
    pub fn broadcast(
        &mut self,
        t: f64,
        stations: &[Station],
        message: V2xMessage,
    ) -> Result<Vec<VehicleId>, V2xError> {
        if !stations.iter().any(|s| s.id == message.sender) {
            return Err(V2xError::UnknownSender(message.sender));
        }
        let mut delivered = Vec::new();
        for s in stations {
            if s.id == message.sender || !in_range(message.sender_position, s.position, &self.config) {
                continue;
            }
            delivered.push(s.id);
            *self.deliveries.entry(message.kind).or_default() += 1;
            if message.kind != MessageKind::Beacon || self.log_beacons {
                self.log.push(DeliveryRow {
                    t,
                    kind: message.kind,
                    origin: message.origin,
                    seq: message.seq,
                    sender: message.sender,
                    receiver: s.id,
                    hop_count: message.hop_count,
                });
            }
            self.inboxes.entry(s.id).or_default().push(message.clone());
        }
        Ok(delivered)
    }

    fn next_seq(&mut self, origin: VehicleId, kind: MessageKind) -> u64 {
        let slot = self.seqs.entry((origin, kind)).or_default();
        let seq = *slot;
        *slot += 1;
        seq
    }

    /// Originates a fresh message (new sequence number) from `origin`.
    pub fn originate(
        &mut self,
        t: f64,
        stations: &[Station],
        origin: VehicleId,
        kind: MessageKind,
        payload: Payload,
    ) -> Result<V2xMessage, V2xError> {
        let station = stations
            .iter()
            .find(|s| s.id == origin)
            .ok_or(V2xError::UnknownSender(origin))?;
        let seq = self.next_seq(origin, kind);
        let message = V2xMessage {
            kind,
            origin,
            seq,
            sent_at: t,
            sender: origin,
            sender_position: station.position,
            payload,
            hop_count: 1,
        };
        if kind.relays() {
            self.seen.entry(origin).or_default().insert(message.key());
        }
        self.broadcast(t, stations, message.clone())?;
        Ok(message)
    }

    /// Every station whose time since departure is a whole number of beacon
    /// intervals sends one beacon.
    pub fn beacon_step(&mut self, t: f64, stations: &[Station]) -> usize {
        let mut sent = 0;
        for s in stations {
            if on_period(t - s.depart_time, self.config.beacon_interval_s) {
                let payload = Payload::Kinematics {
                    speed: s.speed,
                    accel: s.accel,
                };
                self.originate(t, stations, s.id, MessageKind::Beacon, payload)
                    .expect("station is active");
                sent += 1;
            }
        }
        sent
    }

    /// Puts relays queued by the previous [`relay_step`](Self::relay_step)
    /// on air. Relays whose sender has left the network are dropped.
    pub fn flush_relays(&mut self, t: f64, stations: &[Station]) -> usize {
        let queued = std::mem::take(&mut self.pending_relays);
        let mut sent = 0;
        for mut m in queued {
            let Some(s) = stations.iter().find(|s| s.id == m.sender) else {
                continue;
            };
            m.sender_position = s.position;
            m.sent_at = t;
            self.broadcast(t, stations, m).expect("station is active");
            sent += 1;
        }
        sent
    }

    /// Drains all inboxes. Each unseen relaying message is marked seen,
    /// queued for relay and returned for handling; duplicates and beacons
    /// are dropped. Output is ordered by receiver id, then arrival order.
    pub fn relay_step(&mut self) -> Vec<(VehicleId, V2xMessage)> {
        let inboxes = std::mem::take(&mut self.inboxes);
        let mut handled = Vec::new();
        for (receiver, messages) in inboxes {
            for m in messages {
                if !m.kind.relays() {
                    continue;
                }
                if !self.seen.entry(receiver).or_default().insert(m.key()) {
                    continue;
                }
                if self.config.max_hops.is_none_or(|max| m.hop_count < max) {
                    self.pending_relays.push(V2xMessage {
                        sender: receiver,
                        hop_count: m.hop_count + 1,
                        ..m.clone()
                    });
                }
                handled.push((receiver, m));
            }
        }
        handled
    }

    /// Messages waiting in `vehicle`'s inbox for the next relay step.
    pub fn inbox(&self, vehicle: VehicleId) -> &[V2xMessage] {
        self.inboxes.get(&vehicle).map_or(&[], Vec::as_slice)
    }

    pub fn has_seen(&self, vehicle: VehicleId, key: &MessageKey) -> bool {
        self.seen.get(&vehicle).is_some_and(|s| s.contains(key))
    }

    /// Forgets per-vehicle state of a vehicle that left the network.
    pub fn forget(&mut self, vehicle: VehicleId) {
        self.inboxes.remove(&vehicle);
        self.seen.remove(&vehicle);
    }

    pub fn log(&self) -> &[DeliveryRow] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<DeliveryRow> {
        std::mem::take(&mut self.log)
    }

    /// Total deliveries per kind, logged or not.
    pub fn deliveries(&self) -> &BTreeMap<MessageKind, u64> {
        &self.deliveries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn station(id: u32, x: f64) -> Station {
        Station {
            id: VehicleId(id),
            position: (x, 0.0),
            depart_time: 0.0,
            speed: 0.0,
            accel: 0.0,
        }
    }

    fn warning() -> Payload {
        Payload::Breakdown(BreakdownLocation {
            vehicle: VehicleId(0),
            edge: EdgeIndex(0),
            pos: 10.0,
        })
    }

    #[test]
    fn range_gate_is_inclusive() {
        let c = CommConfig::default();
        assert!(in_range((0.0, 0.0), (0.0, 299.0), &c));
        assert!(in_range((0.0, 0.0), (0.0, 300.0), &c));
        assert!(!in_range((0.0, 0.0), (0.0, 301.0), &c));
    }

    #[test]
    fn broadcast_respects_range() {
        let mut ch = Channel::new(CommConfig::default(), true);
        let st = [station(0, 0.0), station(1, 100.0), station(2, 400.0)];
        let m = ch
            .originate(0.0, &st, VehicleId(0), MessageKind::Beacon, Payload::Kinematics { speed: 0.0, accel: 0.0 })
            .unwrap();
        assert_eq!(m.seq, 0);
        assert_eq!(ch.inbox(VehicleId(1)).len(), 1);
        assert!(ch.inbox(VehicleId(2)).is_empty());
        let alone = [station(0, 0.0)];
        let mut ch = Channel::new(CommConfig::default(), true);
        let out = ch.broadcast(0.0, &alone, m.clone()).unwrap();
        assert!(out.is_empty());
        assert_eq!(
            ch.broadcast(0.0, &[station(3, 0.0)], m),
            Err(V2xError::UnknownSender(VehicleId(0)))
        );
    }

    #[test]
    fn beacons_follow_departure_phase() {
        let cfg = CommConfig {
            beacon_interval_s: 2.0,
            ..CommConfig::default()
        };
        let mut ch = Channel::new(cfg, true);
        let mut st = vec![station(0, 0.0), station(1, 10.0)];
        st[1].depart_time = 1.0;
        assert_eq!(ch.beacon_step(4.0, &st), 1);
        assert_eq!(ch.beacon_step(5.0, &st), 1);
        assert_eq!(ch.log()[0].sender, VehicleId(0));
        assert_eq!(ch.log()[1].sender, VehicleId(1));
    }

    #[test]
    fn ten_mutual_neighbours_get_nine_beacons_each() {
        let mut ch = Channel::new(CommConfig::default(), true);
        let st: Vec<_> = (0..10).map(|i| station(i, f64::from(i) * 10.0)).collect();
        ch.beacon_step(5.0, &st);
        for s in &st {
            assert_eq!(ch.inbox(s.id).len(), 9);
        }
        assert_eq!(ch.log().len(), 90);
        assert!(ch.relay_step().is_empty());
    }

    #[test]
    fn beacons_can_be_left_out_of_the_log() {
        let mut ch = Channel::new(CommConfig::default(), false);
        let st = [station(0, 0.0), station(1, 10.0)];
        ch.beacon_step(0.0, &st);
        assert!(ch.log().is_empty());
        assert_eq!(ch.deliveries()[&MessageKind::Beacon], 2);
    }

    #[test]
    fn duplicate_delivery_is_handled_once() {
        let mut ch = Channel::new(CommConfig::default(), true);
        let st = [station(0, 0.0), station(1, 100.0)];
        let m = ch
            .originate(0.0, &st, VehicleId(0), MessageKind::BreakdownWarning, warning())
            .unwrap();
        ch.broadcast(0.0, &st, m).unwrap();
        assert_eq!(ch.inbox(VehicleId(1)).len(), 2);
        assert_eq!(ch.relay_step().len(), 1);
    }

    // A at 0, B at 250, C at 500: C hears nothing until B relays.
    #[test]
    fn two_hop_chain() {
        let mut ch = Channel::new(CommConfig::default(), true);
        let st = [station(0, 0.0), station(1, 250.0), station(2, 500.0)];
        ch.originate(0.0, &st, VehicleId(0), MessageKind::BreakdownWarning, warning())
            .unwrap();
        let first = ch.relay_step();
        assert_eq!(first.len(), 1);
        assert_eq!((first[0].0, first[0].1.hop_count), (VehicleId(1), 1));
        ch.flush_relays(1.0, &st);
        let second = ch.relay_step();
        assert_eq!(second.len(), 1);
        assert_eq!((second[0].0, second[0].1.hop_count), (VehicleId(2), 2));
        // C's relay reaches B again, already seen
        ch.flush_relays(2.0, &st);
        assert!(ch.relay_step().is_empty());
    }

    #[test]
    fn max_hops_stops_relaying() {
        let cfg = CommConfig {
            max_hops: Some(1),
            ..CommConfig::default()
        };
        let mut ch = Channel::new(cfg, true);
        let st = [station(0, 0.0), station(1, 250.0), station(2, 500.0)];
        ch.originate(0.0, &st, VehicleId(0), MessageKind::BreakdownResolved, warning())
            .unwrap();
        assert_eq!(ch.relay_step().len(), 1);
        assert_eq!(ch.flush_relays(1.0, &st), 0);
    }

    #[test]
    fn sequence_numbers_are_per_origin_and_kind() {
        let mut ch = Channel::new(CommConfig::default(), true);
        let st = [station(0, 0.0), station(1, 10.0)];
        let w = |ch: &mut Channel, id, kind| ch.originate(0.0, &st, VehicleId(id), kind, warning()).unwrap().seq;
        assert_eq!(w(&mut ch, 0, MessageKind::BreakdownWarning), 0);
        assert_eq!(w(&mut ch, 0, MessageKind::BreakdownWarning), 1);
        assert_eq!(w(&mut ch, 0, MessageKind::BreakdownResolved), 0);
        assert_eq!(w(&mut ch, 1, MessageKind::BreakdownWarning), 0);
    }

    #[test]
    fn period_check() {
        assert!(on_period(0.0, 1.0));
        assert!(on_period(3.0000000001, 1.0));
        assert!(!on_period(3.5, 1.0));
        assert!(!on_period(-1.0, 1.0));
        assert!(on_period(0.3, 0.1));
    }
}
