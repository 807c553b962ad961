//! Built-in synthetic networks and the six-run experiment matrix.
//!
//! `junction`: single-lane mainline `S → J1 → J2 → J3 → E` with a bypass
//! `J1 → R1 → R2 → J3`. The breakdown happens on `J2_J3`, between the
//! bypass split and merge.
//!
//! `midlink`: two-lane mainline `S → D → M → E`; the breakdown happens on
//! `D_M` and the only alternative, `D → A → E`, leaves at `D`.

use serde::{Deserialize, Serialize};

use super::config::{DemandConfig, OutputConfig, ScenarioConfig, ScenarioSection};
use crate::incident::BreakdownSchedule;
use crate::metrics::DetectorSpec;
use crate::network::RoadNetwork;
use crate::rerouting::ReroutingConfig;
use crate::traffic::{DemandGenerator, VehicleId};
use crate::v2x::CommConfig;

pub const JUNCTION: &str = "\
# mainline
NODE S 0 0
NODE J1 2400 0
NODE J2 2700 0
NODE J3 3500 0
NODE E 4500 0
# bypass
NODE R1 2600 -200
NODE R2 3300 -200
EDGE S_J1 S J1 2400 26.8224 1
EDGE J1_J2 J1 J2 300 26.8224 1
EDGE J2_J3 J2 J3 800 26.8224 1
EDGE J3_E J3 E 1000 26.8224 1
EDGE J1_R1 J1 R1 300 26.8224 1
EDGE R1_R2 R1 R2 800 26.8224 1
EDGE R2_J3 R2 J3 300 26.8224 1
";

pub const MIDLINK: &str = "\
# mainline
NODE S 0 0
NODE D 2800 0
NODE M 3400 0
NODE E 4400 0
# alternative
NODE A 3600 -250
EDGE S_D S D 2800 26.8224 2
EDGE D_M D M 600 26.8224 2
EDGE M_E M E 1000 26.8224 2
EDGE D_A D A 830 26.8224 1
EDGE A_E A E 830 26.8224 1
";

pub fn builtin_network(name: &str) -> Option<RoadNetwork> {
    let text = match name {
        "junction" => JUNCTION,
        "midlink" => MIDLINK,
        _ => return None,
    };
    Some(RoadNetwork::parse(text).expect("built-in network is valid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Junction,
    Midlink,
}

impl Group {
    pub fn network(self) -> &'static str {
        match self {
            Group::Junction => "junction",
            Group::Midlink => "midlink",
        }
    }
}

/// The three arms of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// No breakdown.
    Baseline,
    /// Breakdown, no connected-vehicle layer.
    Disabled,
    /// Breakdown, warnings and rerouting.
    Enabled,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Baseline => "baseline",
            Role::Disabled => "disabled",
            Role::Enabled => "enabled",
        })
    }
}

pub const DEFAULT_SEED: u64 = 7;
pub const BREAKDOWN_START_S: f64 = 115.0;
pub const BREAKDOWN_DURATION_S: f64 = 300.0;

/// One arm of the built-in experiment matrix. Arms of a group differ only in
/// the breakdown and the rerouting switch.
pub fn table3_scenario(group: Group, role: Role, seed: u64) -> ScenarioConfig {
    let (destination, detector_edge, detector_pos) = match group {
        Group::Junction => ("E", "S_J1", 2200.0),
        Group::Midlink => ("E", "S_D", 2600.0),
    };
    let generator = DemandGenerator {
        total: 400,
        passenger_fraction: 0.8,
        depart_start_s: 0.0,
        depart_end_s: 1000.0,
        origin: "S".into(),
        destination: destination.into(),
    };
    ScenarioConfig {
        scenario: ScenarioSection {
            name: format!("{}-{role}", group.network()),
            network: format!("builtin:{}", group.network()),
            end_time_s: 3000.0,
            dt_s: 1.0,
            seed,
            stall_threshold_s: 300.0,
        },
        demand: DemandConfig::generator(&generator),
        comm: CommConfig::default(),
        breakdown: (role != Role::Baseline).then(|| {
            BreakdownSchedule::new(VehicleId(0), 1, BREAKDOWN_START_S, BREAKDOWN_DURATION_S, 0.0)
        }),
        rerouting: ReroutingConfig {
            enabled: role == Role::Enabled,
            ..ReroutingConfig::default()
        },
        output: OutputConfig {
            profile_vehicles: vec![VehicleId(13), VehicleId(19)],
            ..OutputConfig::default()
        },
        detectors: vec![DetectorSpec {
            id: "C".into(),
            edge: detector_edge.into(),
            pos_m: detector_pos,
        }],
        base_dir: Default::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_route() {
        let j = builtin_network("junction").unwrap();
        let sp = j.shortest_path("S", "E").unwrap().unwrap();
        let ids: Vec<_> = sp.route.edge_ids(&j).collect();
        assert_eq!(ids, ["S_J1", "J1_J2", "J2_J3", "J3_E"]);
        let m = builtin_network("midlink").unwrap();
        let ids: Vec<_> = m.shortest_path("S", "E").unwrap().unwrap().route.edge_ids(&m).map(str::to_string).collect();
        assert_eq!(ids, ["S_D", "D_M", "M_E"]);
        assert!(builtin_network("nowhere").is_none());
    }

    #[test]
    fn arms_differ_only_in_controlled_fields() {
        for g in [Group::Junction, Group::Midlink] {
            let strip = |mut c: ScenarioConfig| {
                c.scenario.name.clear();
                c.breakdown = None;
                c.rerouting.enabled = false;
                c
            };
            let base = strip(table3_scenario(g, Role::Baseline, 1));
            assert_eq!(base, strip(table3_scenario(g, Role::Disabled, 1)));
            assert_eq!(base, strip(table3_scenario(g, Role::Enabled, 1)));
            table3_scenario(g, Role::Enabled, 1).validate().unwrap();
        }
    }
}
