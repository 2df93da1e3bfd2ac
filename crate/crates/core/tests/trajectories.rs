use proptest::prelude::*;
use wayfind::features::{
    detect_hesitations, head_rotation, wayfinding_performance, BehaviorMetrics, PauseRule, Sample,
    Trajectory,
};
use wayfind::netgraph::Network;
use wayfind::routeset::{bfs_le, Route};
use wayfind::synth::{desk_network, desk_tasks, simulate_trajectory, TrajectoryParams};

fn straight() -> (Network, Route) {
    let net = desk_network();
    let route = Route::from_ids(&net, &["h1_00", "h1_10", "h1_20"]).unwrap();
    (net, route)
}

fn with_pauses(pauses: &[f64], seed: u64) -> Trajectory {
    let (net, route) = straight();
    let params = TrajectoryParams {
        pause_durations_s: pauses.to_vec(),
        ..Default::default()
    };
    simulate_trajectory(&route, &net, &params, seed).unwrap()
}

#[test]
fn four_and_five_second_pauses_are_two_hesitations() {
    for seed in 0..50 {
        let tr = with_pauses(&[4.0, 5.0], seed);
        assert_eq!(
            detect_hesitations(&tr, PauseRule::default()),
            2,
            "seed {seed}"
        );
    }
}

#[test]
fn two_second_pause_is_never_counted() {
    for seed in 0..50 {
        assert_eq!(
            detect_hesitations(&with_pauses(&[2.0], seed), PauseRule::default()),
            0
        );
        assert_eq!(
            detect_hesitations(&with_pauses(&[2.0, 4.0, 2.0], seed), PauseRule::default()),
            1
        );
    }
}

#[test]
fn walking_speed_round_trips() {
    let (net, route) = straight();
    let tr = simulate_trajectory(&route, &net, &TrajectoryParams::default(), 9).unwrap();
    let p = wayfinding_performance(&tr).unwrap();
    assert!((p.avg_speed_mps - 1.4).abs() <= 0.01, "{}", p.avg_speed_mps);
}

#[test]
fn straight_route_without_noise_has_no_head_rotation() {
    let tr = with_pauses(&[], 1);
    assert_eq!(head_rotation(&tr), 0.0);
}

#[test]
fn yaw_wrap_is_two_degrees_per_second() {
    let sample = |t_s, yaw_deg| Sample {
        t_s,
        x_m: 0.0,
        y_m: 0.0,
        floor: 1,
        yaw_deg,
    };
    let tr = Trajectory::new(vec![sample(0.0, 359.0), sample(1.0, 1.0)]).unwrap();
    assert!((head_rotation(&tr) - 2.0).abs() < 1e-12);
    let back = Trajectory::new(vec![sample(0.0, 1.0), sample(0.5, 359.0)]).unwrap();
    assert!((head_rotation(&back) - 4.0).abs() < 1e-12);
}

#[test]
fn yaw_noise_raises_head_rotation() {
    let (net, route) = straight();
    let params = TrajectoryParams {
        yaw_noise_deg: 2.0,
        ..Default::default()
    };
    let tr = simulate_trajectory(&route, &net, &params, 4).unwrap();
    assert!(head_rotation(&tr) > 0.0);
}

#[test]
fn csv_round_trip_keeps_metrics() {
    let tr = with_pauses(&[4.0], 2);
    let back = Trajectory::from_csv(&tr.to_csv()).unwrap();
    let a = BehaviorMetrics::derive(&tr, PauseRule::default()).unwrap();
    let b = BehaviorMetrics::derive(&back, PauseRule::default()).unwrap();
    assert_eq!(a.hesitations, b.hesitations);
    assert!((a.avg_speed_mps - b.avg_speed_mps).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn speed_round_trips_on_task_routes(
        task in 1u32..5,
        pick in any::<prop::sample::Index>(),
        speed in 0.5f64..2.5,
        seed in any::<u64>(),
    ) {
        let net = desk_network();
        let (o, d) = desk_tasks()[&task].clone();
        let set = bfs_le(&net, (&o, &d), 1).unwrap();
        let route = &set.routes()[pick.index(set.len())];
        let params = TrajectoryParams { speed_mps: speed, ..Default::default() };
        let tr = simulate_trajectory(route, &net, &params, seed).unwrap();
        let p = wayfinding_performance(&tr).unwrap();
        prop_assert!((p.avg_speed_mps - speed).abs() <= 0.01);
        prop_assert_eq!(detect_hesitations(&tr, PauseRule::default()), 0);
    }

    #[test]
    fn hesitations_count_long_pauses(
        pauses in prop::collection::vec(prop_oneof![0.5f64..2.5, 3.5f64..8.0], 0..4),
        seed in any::<u64>(),
    ) {
        let tr = with_pauses(&pauses, seed);
        let long = pauses.iter().filter(|&&d| d > 3.0).count();
        prop_assert_eq!(detect_hesitations(&tr, PauseRule::default()), long);
    }
}
