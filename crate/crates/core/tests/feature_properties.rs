use proptest::prelude::*;
use wayfind::features::{
    detect_hesitations, head_rotation, route_features, FeatureVector, PauseRule, Sample, Trajectory,
};
use wayfind::netgraph::{Link, Network, Node};
use wayfind::routeset::Route;
use wayfind::synth::{desk_network, simulate_trajectory, TrajectoryParams};

/// A polyline through random points, with forward links `f{i}` and reverse
/// links `r{i}`. Link flags are drawn from `flags`.
fn polyline(points: &[(f64, f64)], flags: &[u8], scale: f64) -> (Network, Route, Route) {
    let nodes: Vec<Node> = points
        .iter()
        .enumerate()
        .map(|(i, (x, y))| Node::new(format!("p{i}"), x * scale, y * scale, 1))
        .collect();
    let mut links = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        let len = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) * 100.0 * scale;
        let mut l = Link::new(format!("f{i}"), format!("p{i}"), format!("p{}", i + 1), len);
        let f = flags[i % flags.len()];
        if f & 1 != 0 {
            l = l.window();
        }
        if f & 2 != 0 {
            l = l.wide();
        }
        if f & 4 != 0 {
            l = l.firedoors(1);
        }
        links.push(l.reversed(format!("r{i}")));
        links.push(l);
    }
    let n = points.len() - 1;
    let fwd: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
    let back: Vec<String> = (0..n).rev().map(|i| format!("r{i}")).collect();
    let net = Network::build(nodes, links, None).unwrap();
    let a = Route::from_ids(&net, &fwd).unwrap();
    let b = Route::from_ids(&net, &back).unwrap();
    (net, a, b)
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 2..9).prop_filter("distinct", |p| {
        p.windows(2)
            .all(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) > 0.5)
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn well_formed(f: &FeatureVector) -> bool {
    f.turns_left + f.turns_right == f.turns_tot
        && f.rot_abs >= 90.0 * f.turns_tot - 1e-9
        && f.rot_abs <= 180.0 * f.turns_tot + 1e-9
        && (0.0..=1.0).contains(&f.window)
        && (0.0..=1.0).contains(&f.ratio_wide)
        && f.dist_firstturn <= f.distot + 1e-9
        && f.dist_longeststretch <= f.distot + 1e-9
        && f.dist_avg_straight <= f.dist_longeststretch + 1e-9
        && f.level_no >= 1.0
        && f.task_1 + f.task_2 + f.task_3 + f.task_4 == 1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reversal_swaps_turn_directions(pts in points(), flags in prop::collection::vec(0u8..8, 1..4)) {
        let (net, fwd, back) = polyline(&pts, &flags, 1.0);
        let a = route_features(&fwd, &net, 1).unwrap();
        let b = route_features(&back, &net, 1).unwrap();
        prop_assert_eq!(a.turns_tot, b.turns_tot);
        prop_assert_eq!(a.turns_left, b.turns_right);
        prop_assert_eq!(a.turns_right, b.turns_left);
        prop_assert!(close(a.rot_abs, b.rot_abs));
        prop_assert!(close(a.distot, b.distot));
        prop_assert!(well_formed(&a) && well_formed(&b));
    }

    #[test]
    fn doubling_lengths_doubles_distances(
        pts in points(),
        flags in prop::collection::vec(0u8..8, 1..4),
        task in 1u32..5,
    ) {
        let (net, r, _) = polyline(&pts, &flags, 1.0);
        let (net2, r2, _) = polyline(&pts, &flags, 2.0);
        let a = route_features(&r, &net, task).unwrap();
        let b = route_features(&r2, &net2, task).unwrap();
        for (x, y) in [
            (a.distot, b.distot),
            (a.dist_firstturn, b.dist_firstturn),
            (a.dist_avg_straight, b.dist_avg_straight),
            (a.dist_longeststretch, b.dist_longeststretch),
        ] {
            prop_assert!(close(2.0 * x, y));
        }
        prop_assert!(close(a.window, b.window) && close(a.ratio_wide, b.ratio_wide));
        prop_assert_eq!(
            (a.turns_tot, a.turns_left, a.firedoor, a.level_no),
            (b.turns_tot, b.turns_left, b.firedoor, b.level_no)
        );
        prop_assert!(close(a.rot_abs, b.rot_abs));
        prop_assert!(well_formed(&a));
    }

    #[test]
    fn hesitations_ignore_time_shifts(
        pauses in prop::collection::vec(0.5f64..7.0, 0..3),
        shift in -1000.0f64..1000.0,
        seed in any::<u64>(),
    ) {
        let net = desk_network();
        let route = Route::from_ids(&net, &["h1_00", "h1_10", "h1_20"]).unwrap();
        let params = TrajectoryParams { pause_durations_s: pauses, ..Default::default() };
        let tr = simulate_trajectory(&route, &net, &params, seed).unwrap();
        let moved: Vec<Sample> = tr
            .samples()
            .iter()
            .map(|s| Sample { t_s: s.t_s + shift, ..*s })
            .collect();
        let moved = Trajectory::new(moved).unwrap();
        prop_assert_eq!(
            detect_hesitations(&tr, PauseRule::default()),
            detect_hesitations(&moved, PauseRule::default())
        );
    }

    #[test]
    fn head_rotation_ignores_a_constant_yaw_offset(
        yaws in prop::collection::vec(0.0f64..360.0, 2..40),
        offset in 0.0f64..360.0,
    ) {
        let mk = |off: f64| {
            Trajectory::new(
                yaws.iter()
                    .enumerate()
                    .map(|(i, y)| Sample {
                        t_s: i as f64 * 0.1,
                        x_m: 0.0,
                        y_m: 0.0,
                        floor: 1,
                        yaw_deg: (y + off).rem_euclid(360.0) % 360.0,
                    })
                    .collect(),
            )
            .unwrap()
        };
        prop_assert!((head_rotation(&mk(0.0)) - head_rotation(&mk(offset))).abs() < 1e-7);
    }
}

#[test]
fn ten_degrees_per_second() {
    let tr = Trajectory::new(
        (0..=10)
            .map(|i| Sample {
                t_s: i as f64,
                x_m: 0.0,
                y_m: 0.0,
                floor: 1,
                yaw_deg: 10.0 * i as f64,
            })
            .collect(),
    )
    .unwrap();
    assert!((head_rotation(&tr) - 10.0).abs() < 1e-12);
}
