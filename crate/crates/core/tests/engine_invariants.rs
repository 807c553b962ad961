mod common;

use proptest::prelude::*;

use common::{random_run, run_checked};
use cvroute::scenario::{run_scenario, table3_scenario, Group, Role, DEFAULT_SEED};
use cvroute::traffic::{krauss_speed, safe_speed, DriveMode, Leader, VehicleClass, VehicleId, VehicleKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_runs_keep_every_step_invariant(seed in any::<u64>()) {
        let run = random_run(seed, 2000);
        let c = run_checked(&run);
        prop_assert_eq!(c.steps, 2000);
        prop_assert_eq!(c.negative_gaps, 0);
        prop_assert!(c.violations.is_empty(), "{:?}", c.violations);
    }

    // Without forced stops nothing may brake harder than max_decel.
    #[test]
    fn speed_changes_stay_in_the_comfort_box_without_breakdowns(seed in any::<u64>()) {
        let mut run = random_run(seed, 2000);
        run.config.breakdown = None;
        let c = run_checked(&run);
        prop_assert_eq!(c.shadow_braking, 0);
        prop_assert!(c.violations.is_empty(), "{:?}", c.violations);
    }

    #[test]
    fn safe_speed_is_monotone_in_gap(vl in 0.0f64..30.0, vf in 0.0f64..30.0, g in 0.0f64..200.0, extra in 0.0f64..50.0) {
        let class = VehicleClass::passenger();
        let near = safe_speed(vf, Leader { speed: vl, gap: g }, &class, 1.0);
        let far = safe_speed(vf, Leader { speed: vl, gap: g + extra }, &class, 1.0);
        prop_assert!(far >= near);
        prop_assert!(near >= 0.0);
    }
}

#[test]
fn krauss_hand_evaluations() {
    let mut class = VehicleClass::passenger();
    class.sigma = 0.0;
    // 20 + (50 - 20) / ((20 + 25) / 9 + 1) = 25
    let leader = Leader {
        speed: 20.0,
        gap: 50.0 + class.min_gap,
    };
    assert_eq!(krauss_speed(25.0, &class, 26.8224, Some(leader), 1.0, 0.0).unwrap(), 25.0);
    // free road: 20 + 2.6
    assert!((krauss_speed(20.0, &class, 26.8224, None, 1.0, 0.0).unwrap() - 22.6).abs() < 1e-12);
    // standstill fixed point, any sigma with r = 0
    class.sigma = 0.6;
    let stopped = Leader {
        speed: 0.0,
        gap: class.min_gap,
    };
    assert_eq!(krauss_speed(0.0, &class, 26.8224, Some(stopped), 1.0, 0.0).unwrap(), 0.0);
    assert!(krauss_speed(10.0, &class, 26.8224, Some(Leader { speed: 0.0, gap: -0.1 }), 1.0, 0.0).is_err());
}

#[test]
fn vehicle_classes_follow_the_calibration_table() {
    let p = VehicleClass::passenger();
    let h = VehicleClass::hgv();
    assert_eq!((p.max_accel, p.max_decel, p.min_gap, p.sigma), (2.6, 4.5, 2.5, 0.6));
    assert_eq!((h.max_accel, h.max_decel, h.min_gap, h.sigma), (2.6, 4.5, 2.5, 0.4));
    // 60 mph
    assert!((p.max_speed - 60.0 * 1609.344 / 3600.0).abs() < 1e-12);
}

#[test]
fn baseline_inserts_the_exact_class_split() {
    let out = run_scenario(&table3_scenario(Group::Junction, Role::Baseline, DEFAULT_SEED), None).unwrap();
    let s = &out.summary;
    assert_eq!((s.demand, s.inserted, s.arrived), (400, 400, 400));
    let passengers = out.journeys.iter().filter(|j| j.class == VehicleKind::Passenger).count();
    assert_eq!(passengers, 320);
    assert_eq!(out.journeys.len() - passengers, 80);
}

#[test]
fn broken_down_vehicle_is_stopped_for_its_whole_window() {
    let cfg = table3_scenario(Group::Junction, Role::Disabled, DEFAULT_SEED);
    let network = cfg.network().unwrap();
    let demand = cfg.demand_spec().unwrap();
    let mut sim = cvroute::Simulation::new(network, &demand, cfg.simulation_config()).unwrap();
    let mut down = Vec::new();
    while sim.time() < 450.0 {
        let t = sim.time();
        sim.step().unwrap();
        let v = sim.world().vehicle(VehicleId(0)).unwrap();
        if v.mode == DriveMode::BrokenDown {
            assert_eq!(v.speed, 0.0);
            down.push(t);
        }
    }
    assert_eq!(down.first(), Some(&115.0));
    assert_eq!(down.last(), Some(&414.0));
    assert_eq!(down.len(), 300);
}
