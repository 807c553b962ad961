//! Simplified incentive/safety lane-change rule.
//!
//! A vehicle changes lane when its same-lane leader holds the Krauss safe
//! speed below [`LANE_CHANGE_INCENTIVE`] of the desired speed, and an adjacent
//! lane has room in front (`min_gap + v * dt`) and a rear vehicle that would
//! not have to brake harder than its `max_decel` to accommodate the change.

use super::class::VehicleClass;
use super::krauss::{safe_speed, Leader};

/// Fraction of the desired speed below which a constrained vehicle looks for
/// another lane.
pub const LANE_CHANGE_INCENTIVE: f64 = 0.5;

/// The vehicle that would become the changer's follower in the target lane.
/// `gap` runs from its front bumper to the changer's rear bumper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RearVehicle {
    pub speed: f64,
    pub gap: f64,
    pub class: VehicleClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjacentLane {
    pub lane: u32,
    pub front: Option<Leader>,
    pub rear: Option<RearVehicle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneDecision {
    Stay,
    Change(u32),
}

/// The changer's own state.
#[derive(Debug, Clone, Copy)]
pub struct Changer<'a> {
    pub speed: f64,
    pub desired_speed: f64,
    pub class: &'a VehicleClass,
}

pub fn lane_change_decide(
    me: Changer<'_>,
    same_lane_leader: Option<Leader>,
    adjacent: &[AdjacentLane],
    dt: f64,
) -> LaneDecision {
    let Some(leader) = same_lane_leader else {
        return LaneDecision::Stay;
    };
    let current = safe_speed(me.speed, leader, me.class, dt);
    if current >= LANE_CHANGE_INCENTIVE * me.desired_speed {
        return LaneDecision::Stay;
    }

    let mut best: Option<(f64, u32)> = None;
    for lane in adjacent {
        if !front_is_clear(&me, lane.front, dt) || !rear_is_safe(&me, lane.rear, dt) {
            continue;
        }
        let offered = lane
            .front
            .map_or(f64::INFINITY, |f| safe_speed(me.speed, f, me.class, dt));
        if offered <= current {
            continue;
        }
        let better = match best {
            None => true,
            Some((speed, idx)) => offered > speed || (offered == speed && lane.lane < idx),
        };
        if better {
            best = Some((offered, lane.lane));
        }
    }
    best.map_or(LaneDecision::Stay, |(_, lane)| LaneDecision::Change(lane))
}

fn front_is_clear(me: &Changer<'_>, front: Option<Leader>, dt: f64) -> bool {
    front.is_none_or(|f| f.gap >= me.class.min_gap + me.speed * dt)
}

fn rear_is_safe(me: &Changer<'_>, rear: Option<RearVehicle>, dt: f64) -> bool {
    let Some(rear) = rear else {
        return true;
    };
    if rear.gap < 0.0 {
        return false;
    }
    let floor = rear.speed - rear.class.max_decel * dt;
    let krauss = safe_speed(
        rear.speed,
        Leader {
            speed: me.speed,
            gap: rear.gap,
        },
        &rear.class,
        dt,
    );
    krauss >= floor && rear.gap / dt >= floor
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::class::MAX_SPEED_60_MPH;

    fn me(class: &VehicleClass, speed: f64) -> Changer<'_> {
        Changer {
            speed,
            desired_speed: MAX_SPEED_60_MPH,
            class,
        }
    }

    #[test]
    fn free_lane_stays() {
        let class = VehicleClass::passenger();
        let adj = [AdjacentLane { lane: 1, front: None, rear: None }];
        assert_eq!(lane_change_decide(me(&class, 20.0), None, &adj, 1.0), LaneDecision::Stay);
        let far = Leader { speed: 25.0, gap: 200.0 };
        assert_eq!(lane_change_decide(me(&class, 20.0), Some(far), &adj, 1.0), LaneDecision::Stay);
    }

    #[test]
    fn stopped_leader_with_empty_neighbor_changes() {
        let class = VehicleClass::passenger();
        let stopped = Leader { speed: 0.0, gap: 10.0 };
        let adj = [AdjacentLane { lane: 1, front: None, rear: None }];
        assert_eq!(
            lane_change_decide(me(&class, 10.0), Some(stopped), &adj, 1.0),
            LaneDecision::Change(1)
        );
    }

    // Rear vehicle 1 m behind at 20 m/s: its safe speed behind a 10 m/s
    // changer is 0 (gap below min_gap), far under the 15.5 m/s floor.
    #[test]
    fn closing_rear_vehicle_blocks_change() {
        let class = VehicleClass::passenger();
        let stopped = Leader { speed: 0.0, gap: 10.0 };
        let rear = RearVehicle { speed: 20.0, gap: 1.0, class };
        let adj = [AdjacentLane { lane: 1, front: None, rear: Some(rear) }];
        assert_eq!(
            lane_change_decide(me(&class, 10.0), Some(stopped), &adj, 1.0),
            LaneDecision::Stay
        );
    }

    #[test]
    fn front_gap_must_fit() {
        let class = VehicleClass::passenger();
        let stopped = Leader { speed: 0.0, gap: 10.0 };
        let tight = Leader { speed: 10.0, gap: class.min_gap + 10.0 - 0.1 };
        let adj = [AdjacentLane { lane: 0, front: Some(tight), rear: None }];
        assert_eq!(
            lane_change_decide(me(&class, 10.0), Some(stopped), &adj, 1.0),
            LaneDecision::Stay
        );
    }

    #[test]
    fn picks_faster_lane_then_lower_index() {
        let class = VehicleClass::passenger();
        let stopped = Leader { speed: 0.0, gap: 10.0 };
        let slow = Leader { speed: 5.0, gap: 40.0 };
        let adj = [
            AdjacentLane { lane: 0, front: Some(slow), rear: None },
            AdjacentLane { lane: 2, front: None, rear: None },
        ];
        assert_eq!(
            lane_change_decide(me(&class, 10.0), Some(stopped), &adj, 1.0),
            LaneDecision::Change(2)
        );
        let adj = [
            AdjacentLane { lane: 2, front: None, rear: None },
            AdjacentLane { lane: 0, front: None, rear: None },
        ];
        assert_eq!(
            lane_change_decide(me(&class, 10.0), Some(stopped), &adj, 1.0),
            LaneDecision::Change(0)
        );
    }
}
