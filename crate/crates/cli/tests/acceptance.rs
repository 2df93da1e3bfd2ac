//! Acceptance gate: runs every criterion and prints one line per criterion.
//! Exits non-zero when any criterion fails, except those listed in
//! `KNOWN_FAILURES`, which are still reported as FAIL.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wayfind::discrete_choice::{
    choice_probabilities, estimate, lr_statistic, ChoiceObservation, EstimateOptions,
    FitStatistics, ModelSpec, PreparedData,
};
use wayfind::features::{
    detect_hesitations, head_rotation, route_features, wayfinding_performance, FeatureVector,
    PauseRule, Sample, Trajectory,
};
use wayfind::modelsearch::{stepwise_search, SearchConfig, SearchPhases};
use wayfind::netgraph::{replica_building, replica_tasks, Link, Network, Node};
use wayfind::optimize::Objective;
use wayfind::regression::{backward_stepwise, ols_fit, DesignMatrix};
use wayfind::routeset::{bfs_le, path_size_in, Route};
use wayfind::synth::{
    brute_force_probs, desk_network, desk_tasks, enumerate_all_simple_paths, random_profile,
    simulate_choices, simulate_trajectory, GenerativeConfig, TrajectoryParams,
    ENUMERATION_LINK_LIMIT,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn fit_statistics() -> Outcome {
    let ll0 = 280.0 * (1.0f64 / 30.0).ln();
    let psl = FitStatistics::from_ll(-330.48, ll0, 7, 280);
    let mnl = FitStatistics::from_ll(-386.38, ll0, 4, 280);
    let detail = format!(
        "PSL AIC {:.2} BIC {:.2}; MNL AIC {:.2} BIC {:.2} rho2 {:.4}",
        psl.aic, psl.bic, mnl.aic, mnl.bic, mnl.rho2
    );
    check(
        close(psl.aic, 674.96, 0.1)
            && close(psl.bic, 700.40, 0.1)
            && close(mnl.aic, 780.8, 0.1)
            && close(mnl.bic, 795.3, 0.1)
            && close(mnl.rho2, 0.594, 0.001),
        detail,
    )
}

fn likelihood_ratios() -> Outcome {
    let a = lr_statistic(-386.38, -376.10, 3).map_err(|e| e.to_string())?;
    let b = lr_statistic(-330.48, -325.89, 2).map_err(|e| e.to_string())?;
    let detail = format!(
        "chi2 {:.2} (df 3, p {:.5}); chi2 {:.2} (df 2, p {:.5})",
        a.statistic, a.p_value, b.statistic, b.p_value
    );
    check(
        close(a.statistic, 20.56, 0.05)
            && a.p_value < 0.01
            && close(b.statistic, 9.18, 1e-9)
            && b.p_value < 0.0102
            && b.p_value > 0.0100,
        detail,
    )
}

fn worked_route() -> wayfind::Result<(Network, Route)> {
    let pts: [(f64, f64); 9] = [
        (0.0, 0.0),
        (5.0, 0.0),
        (5.0, 10.0),
        (17.0, 10.0),
        (17.0, 20.0),
        (32.0, 20.0),
        (42.0, 20.0),
        (42.0, 30.0),
        (44.0, 30.0),
    ];
    let nodes: Vec<Node> = pts
        .iter()
        .enumerate()
        .map(|(i, (x, y))| Node::new(format!("p{i}"), *x, *y, 0))
        .collect();
    let links: Vec<Link> = pts
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let len = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) * 100.0;
            Link::new(format!("l{i}"), format!("p{i}"), format!("p{}", i + 1), len)
        })
        .collect();
    let ids: Vec<String> = links.iter().map(|l| l.id.clone()).collect();
    let net = Network::build(nodes, links, None)?;
    let route = Route::from_ids(&net, &ids)?;
    Ok((net, route))
}

fn floor_sequence() -> wayfind::Result<FeatureVector> {
    let nodes = vec![
        Node::new("a", 0.0, 0.0, 3),
        Node::new("b", 10.0, 0.0, 3),
        Node::new("c", 15.0, 0.0, 2),
        Node::new("d", 25.0, 0.0, 2),
        Node::new("e", 30.0, 0.0, 1),
        Node::new("f", 40.0, 0.0, 1),
        Node::new("g", 45.0, 0.0, 2),
        Node::new("h", 55.0, 0.0, 2),
    ];
    let links = vec![
        Link::new("ab", "a", "b", 1000.0),
        Link::new("bc", "b", "c", 800.0).stair(),
        Link::new("cd", "c", "d", 1000.0),
        Link::new("de", "d", "e", 800.0).stair(),
        Link::new("ef", "e", "f", 1000.0),
        Link::new("fg", "f", "g", 800.0).stair(),
        Link::new("gh", "g", "h", 1000.0),
    ];
    let net = Network::build(nodes, links, None)?;
    let route = Route::from_ids(&net, &["ab", "bc", "cd", "de", "ef", "fg", "gh"])?;
    route_features(&route, &net, 1)
}

fn feature_oracle() -> Outcome {
    let (net, route) = worked_route().map_err(|e| e.to_string())?;
    let f = route_features(&route, &net, 1).map_err(|e| e.to_string())?;
    let floors = floor_sequence().map_err(|e| e.to_string())?;
    let detail = format!(
        "distot {} m, first turn {} m, longest {} m, avg straight {:.3} m, turns {}/{}/{}, rot {} deg, levels {}",
        f.distot / 100.0,
        f.dist_firstturn / 100.0,
        f.dist_longeststretch / 100.0,
        f.dist_avg_straight / 100.0,
        f.turns_tot,
        f.turns_left,
        f.turns_right,
        f.rot_abs,
        floors.level_no
    );
    check(
        close(f.distot, 7400.0, 1e-9)
            && close(f.dist_firstturn, 500.0, 1e-9)
            && close(f.dist_longeststretch, 2500.0, 1e-9)
            && close(f.dist_avg_straight / 100.0, 10.571, 0.02)
            && (f.turns_tot, f.turns_left, f.turns_right) == (6.0, 3.0, 3.0)
            && close(f.rot_abs, 540.0, 1e-9)
            && floors.level_no == 4.0,
        detail,
    )
}

const LINK_LENGTHS: [f64; 12] = [
    10.0, 25.0, 7.5, 40.0, 12.0, 3.0, 18.0, 55.0, 9.0, 31.0, 14.0, 22.0,
];

fn route_of(links: &[usize]) -> Route {
    let lengths: Vec<f64> = links.iter().map(|&l| LINK_LENGTHS[l]).collect();
    Route {
        links: links.iter().map(|l| format!("l{l}")).collect(),
        total_length_cm: lengths.iter().sum(),
        lengths_cm: lengths,
        origin: "O".into(),
        destination: "D".into(),
    }
}

fn path_size_oracle() -> Outcome {
    let unique = path_size_in(&route_of(&[0, 1]), &[route_of(&[0, 1]), route_of(&[2])]);
    let dup = path_size_in(&route_of(&[0]), &[route_of(&[0]), route_of(&[0])]);
    let half = |l: [&str; 2]| Route {
        links: l.iter().map(|s| s.to_string()).collect(),
        lengths_cm: vec![10.0, 10.0],
        total_length_cm: 20.0,
        origin: "O".into(),
        destination: "D".into(),
    };
    let shared = path_size_in(&half(["a", "b"]), &[half(["a", "b"]), half(["a", "c"])]);
    let hand = (unique.ok(), dup.ok(), shared.ok());
    if hand != (Some(1.0), Some(0.5), Some(0.75)) {
        return Err(format!("hand cases {hand:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..8);
        let routes: Vec<Route> = (0..n)
            .map(|_| {
                let mut links: Vec<usize> = (0..LINK_LENGTHS.len())
                    .filter(|_| rng.random_bool(0.3))
                    .collect();
                if links.is_empty() {
                    links.push(rng.random_range(0..LINK_LENGTHS.len()));
                }
                route_of(&links)
            })
            .collect();
        for r in &routes {
            let ps = path_size_in(r, &routes).map_err(|e| e.to_string())?;
            if !(ps > 0.0 && ps <= 1.0) {
                return Err(format!("PS {ps} outside (0, 1] for {:?}", r.links));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "hand cases exact; {checked} routes over 10000 fuzzed sets in (0, 1]"
    ))
}

fn recovery() -> Outcome {
    let truth = GenerativeConfig::default();
    let beta = truth.beta_vector().map_err(|e| e.to_string())?;
    let (net, tasks) = (desk_network(), desk_tasks());
    let mut within = 0;
    let mut n_obs = 0;
    for seed in 0..100 {
        let config = GenerativeConfig {
            seed,
            ..truth.clone()
        };
        let data = simulate_choices(&net, &tasks, &config).map_err(|e| e.to_string())?;
        n_obs = data.len();
        let r = estimate(&config.spec, &data, &EstimateOptions::default())
            .map_err(|e| e.to_string())?;
        if r.converged && (0..r.k).all(|j| (r.beta[j] - beta[j]).abs() <= 3.0 * r.std_err[j]) {
            within += 1;
        }
    }
    check(
        within >= 95 && n_obs == 500,
        format!("{within}/100 replications within 3 SE at n = {n_obs}"),
    )
}

fn random_observation(rng: &mut impl Rng) -> ChoiceObservation {
    let j = rng.random_range(2..9);
    let features = (0..j)
        .map(|_| {
            let turns = rng.random_range(0..8) as f64;
            FeatureVector {
                distot: rng.random_range(1000.0..20000.0),
                turns_tot: turns,
                rot_abs: turns * 90.0 + rng.random_range(0.0..45.0),
                ratio_wide: rng.random_range(0.0..1.0),
                window: rng.random_range(0.0..1.0),
                firedoor: rng.random_range(0..4) as f64,
                ..Default::default()
            }
        })
        .collect();
    ChoiceObservation {
        participant: 1,
        task: 1,
        routes: Vec::new(),
        features,
        path_sizes: (0..j).map(|_| rng.random_range(0.05..1.0)).collect(),
        chosen_index: rng.random_range(0..j),
        profile: random_profile(rng),
    }
}

fn random_spec(rng: &mut impl Rng) -> ModelSpec {
    let family = if rng.random_bool(0.5) { "psl" } else { "mnl" };
    let mut spec = ModelSpec::new(family, &["distot"]);
    for t in ["turns_tot", "ratio_wide", "window", "firedoor"] {
        if rng.random_bool(0.5) {
            spec = spec.with_term(t);
        }
    }
    if rng.random_bool(0.3) {
        spec = spec.with_interaction("distot", "age_young");
    }
    spec
}

fn random_beta(spec: &ModelSpec, rng: &mut impl Rng) -> Vec<f64> {
    spec.parameter_names()
        .map(|n| n.iter().map(|_| rng.random_range(-2.0..2.0)).collect())
        .unwrap_or_default()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_p = 0.0f64;
    for _ in 0..1000 {
        let spec = random_spec(&mut rng);
        let obs = random_observation(&mut rng);
        let beta = random_beta(&spec, &mut rng);
        let p = choice_probabilities(&spec, &beta, &obs).map_err(|e| e.to_string())?;
        let q = brute_force_probs(&spec, &beta, &obs).map_err(|e| e.to_string())?;
        for (a, b) in p.iter().zip(&q) {
            worst_p = worst_p.max((a - b).abs());
        }
    }
    let spec = ModelSpec::new("psl", &["distot", "turns_tot", "window"])
        .with_interaction("distot", "age_young");
    let data: Vec<ChoiceObservation> = (0..40).map(|_| random_observation(&mut rng)).collect();
    let prep = PreparedData::new(&spec, &data).map_err(|e| e.to_string())?;
    let mut worst_g = 0.0f64;
    for _ in 0..20 {
        let x = DVector::from_vec(random_beta(&spec, &mut rng));
        let (_, g) = prep.value_grad(&x);
        for j in 0..x.len() {
            let h = 1e-5 * (1.0 + x[j].abs());
            let mut up = x.clone();
            up[j] += h;
            let mut dn = x.clone();
            dn[j] -= h;
            let fd = (prep.value(&up) - prep.value(&dn)) / (2.0 * h);
            worst_g = worst_g.max((g[j] - fd).abs() / g[j].abs().max(1.0));
        }
    }
    check(
        worst_p <= 1e-12 && worst_g <= 1e-5,
        format!("max probability gap {worst_p:.1e}; max relative gradient gap {worst_g:.1e}"),
    )
}

const SEARCH_CANDIDATES: [&str; 6] = [
    "distot",
    "turns_tot",
    "window",
    "ratio_wide",
    "floorsigns",
    "firedoor",
];

fn simulate_spec(
    spec: ModelSpec,
    values: &[f64],
    seed: u64,
) -> wayfind::Result<Vec<ChoiceObservation>> {
    let true_beta: BTreeMap<String, f64> = spec
        .parameter_names()?
        .into_iter()
        .zip(values.iter().copied())
        .collect();
    let config = GenerativeConfig {
        spec,
        true_beta,
        seed,
        ..Default::default()
    };
    simulate_choices(&desk_network(), &desk_tasks(), &config)
}

fn search_correctness() -> Outcome {
    let config = SearchConfig {
        route_candidates: SEARCH_CANDIDATES.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let mut exact = 0;
    let mut empty = 0;
    for seed in 0..50 {
        let data = simulate_spec(
            ModelSpec::new("psl", &["distot", "turns_tot"]),
            &[-1.0, -0.8, 1.0],
            1000 + seed,
        )
        .map_err(|e| e.to_string())?;
        let trace = stepwise_search(&config, &data, "psl", SearchPhases::InfraOnly)
            .map_err(|e| e.to_string())?;
        let mut best = trace.best_terms();
        best.sort();
        if best == ["distot", "turns_tot"] {
            exact += 1;
        }
        let null = simulate_spec(ModelSpec::new("psl", &["distot"]), &[0.0, 1.0], 2000 + seed)
            .map_err(|e| e.to_string())?;
        let trace = stepwise_search(&config, &null, "psl", SearchPhases::InfraOnly)
            .map_err(|e| e.to_string())?;
        if trace.stage_one_survivors() == 0 {
            empty += 1;
        }
    }
    check(
        exact >= 45 && empty > 25,
        format!("planted pair selected in {exact}/50; null stage 1 empty in {empty}/50"),
    )
}

fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    let m = DMatrix::from_fn(
        n,
        x.len() + 1,
        |i, j| if j == 0 { 1.0 } else { x[j - 1][i] },
    );
    let xtx = m.transpose() * &m;
    let b = xtx
        .cholesky()?
        .solve(&(m.transpose() * DVector::from_column_slice(y)));
    Some(b.iter().copied().collect())
}

fn gaussian_columns(rng: &mut impl Rng, k: usize, n: usize) -> Vec<Vec<f64>> {
    let nd = Normal::new(0.0, 1.0).unwrap();
    (0..k)
        .map(|_| (0..n).map(|_| nd.sample(rng)).collect())
        .collect()
}

fn mlr_suite() -> Outcome {
    let names: Vec<String> = (0..6).map(|i| format!("x{i}")).collect();
    let mut worst_beta = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut retained = 0;
    let mut exact = 0;
    let mut noise_dropped = 0;
    for rep in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + rep);
        let n = 300;
        let x = gaussian_columns(&mut rng, 6, n);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * x[0][i] - 0.3 * x[1][i] + nd.sample(&mut rng))
            .collect();
        let design = DesignMatrix::new("y", y.clone(), names.clone(), x.clone())
            .map_err(|e| e.to_string())?;
        let full = ols_fit(&design).map_err(|e| e.to_string())?;
        let oracle = normal_equations(&x, &y).ok_or("normal equations singular")?;
        for (a, b) in full.beta.iter().zip(&oracle) {
            worst_beta = worst_beta.max((a - b).abs());
        }
        let s = backward_stepwise(&design, 0.05).map_err(|e| e.to_string())?;
        let mut current = design.clone();
        for r in &s.removals {
            let fit = ols_fit(&current).map_err(|e| e.to_string())?;
            let j = fit.index(&r.variable).ok_or("removed variable missing")?;
            worst_f = worst_f.max((r.f_to_remove - fit.t_stat[j].powi(2)).abs());
            current = current.without(&r.variable);
        }
        let kept = s.result.regressors();
        let planted = kept.contains(&names[0]) && kept.contains(&names[1]);
        let noise = kept
            .iter()
            .filter(|v| **v != names[0] && **v != names[1])
            .count();
        retained += planted as usize;
        noise_dropped += 4 - noise;
        if planted && noise == 0 {
            exact += 1;
        }
    }
    check(
        worst_beta <= 1e-8 && worst_f <= 1e-8 && exact >= 95,
        format!(
            "oracle gap {worst_beta:.1e}; F vs t^2 gap {worst_f:.1e}; planted kept in {retained}/100; \
             planted kept and all noise dropped in {exact}/100; noise columns dropped {noise_dropped}/400"
        ),
    )
}

fn trajectory_round_trip() -> Outcome {
    let net = desk_network();
    let route = Route::from_ids(&net, &["h1_00", "h1_10", "h1_20"]).map_err(|e| e.to_string())?;
    let walk = |pauses: &[f64], seed| {
        let params = TrajectoryParams {
            pause_durations_s: pauses.to_vec(),
            ..Default::default()
        };
        simulate_trajectory(&route, &net, &params, seed)
    };
    let rule = PauseRule::default();
    let mut pause_ok = true;
    for seed in 0..20 {
        let two = walk(&[4.0, 5.0], seed).map_err(|e| e.to_string())?;
        let short = walk(&[2.0], seed).map_err(|e| e.to_string())?;
        pause_ok &= detect_hesitations(&two, rule) == 2 && detect_hesitations(&short, rule) == 0;
    }
    let plain = walk(&[], 0).map_err(|e| e.to_string())?;
    let speed = wayfinding_performance(&plain)
        .map_err(|e| e.to_string())?
        .avg_speed_mps;
    let rotation = head_rotation(&plain);
    let sample = |t_s, yaw_deg| Sample {
        t_s,
        x_m: 0.0,
        y_m: 0.0,
        floor: 1,
        yaw_deg,
    };
    let wrap = head_rotation(
        &Trajectory::new(vec![sample(0.0, 359.0), sample(1.0, 1.0)]).map_err(|e| e.to_string())?,
    );
    check(
        pause_ok && close(speed, 1.4, 0.01) && rotation == 0.0 && close(wrap, 2.0, 1e-12),
        format!(
            "pauses {}; speed {speed:.4} m/s; straight rotation {rotation} deg/s; wrap {wrap} deg/s",
            if pause_ok { "counted 2 and 0" } else { "miscounted" }
        ),
    )
}

fn random_tiny_network(rng: &mut impl Rng) -> Option<Network> {
    let nodes: Vec<Node> = (0..6)
        .map(|i| Node::new(format!("n{i}"), (i * 7 % 5) as f64, (i * 3 % 4) as f64, 0))
        .collect();
    let mut links = Vec::new();
    let mut k = 0;
    for a in 0..6 {
        for b in a + 1..6 {
            if links.len() + 2 <= ENUMERATION_LINK_LIMIT && rng.random_bool(0.45) {
                let l = Link::new(
                    format!("e{k}"),
                    format!("n{a}"),
                    format!("n{b}"),
                    rng.random_range(1.0..50.0),
                );
                links.push(l.reversed(format!("e{k}r")));
                links.push(l);
                k += 1;
            }
        }
    }
    Network::build(nodes, links, None).ok()
}

fn bfs_le_routes() -> Outcome {
    let net = replica_building();
    let mut counts = Vec::new();
    for (task, (o, d)) in replica_tasks() {
        let set = bfs_le(&net, (&o, &d), 2).map_err(|e| format!("task {task}: {e}"))?;
        if set
            .routes()
            .iter()
            .any(|r| r.od() != (o.clone(), d.clone()))
        {
            return Err(format!("task {task}: route with the wrong od pair"));
        }
        counts.push(set.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut graphs = 0;
    for _ in 0..300 {
        let Some(tiny) = random_tiny_network(&mut rng) else {
            continue;
        };
        let Ok(all) = enumerate_all_simple_paths(&tiny, ("n0", "n5"), ENUMERATION_LINK_LIMIT)
        else {
            continue;
        };
        if let Ok(set) = bfs_le(&tiny, ("n0", "n5"), rng.random_range(0..4)) {
            if set.routes().iter().any(|r| all.position(r).is_none()) {
                return Err("bfs_le produced a path outside the enumeration".into());
            }
        }
        graphs += 1;
    }
    check(
        counts.iter().all(|c| (30..=300).contains(c)),
        format!("routes per task {counts:?}; subset of enumeration on {graphs} tiny graphs"),
    )
}

fn run_pipeline(dir: &Path, jobs: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_wayfind");
    let steps: [&[&str]; 3] = [
        &[
            "simulate",
            "--network",
            "builtin:desk",
            "--seed",
            "11",
            "--out",
            "sim",
        ],
        &[
            "estimate-choice",
            "--data",
            "sim/observations.json",
            "--family",
            "psl",
            "--terms",
            "distot,turns_tot",
            "--out",
            "est.json",
        ],
        &[
            "report",
            "--data",
            "est.json",
            "--format",
            "json",
            "--out",
            "report.json",
        ],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(args)
            .args(["--jobs", jobs])
            .current_dir(dir)
            .env("WAYFIND_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{} failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    let mut files = BTreeMap::new();
    collect(dir, dir, &mut files).map_err(|e| e.to_string())?;
    Ok(files)
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect(root, &p, out)?;
        } else {
            let key = p.strip_prefix(root).unwrap().display().to_string();
            out.insert(key, fs::read(&p)?);
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..3)
        .map(|_| tempfile::TempDir::new())
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let a = run_pipeline(dirs[0].path(), "1")?;
    let b = run_pipeline(dirs[1].path(), "1")?;
    let c = run_pipeline(dirs[2].path(), "4")?;
    if a != b {
        return Err("two runs with the same arguments differ".into());
    }
    // Manifests record the --jobs value, so only artifacts are compared here.
    let artifacts = |m: &BTreeMap<String, Vec<u8>>| -> BTreeMap<String, Vec<u8>> {
        m.iter()
            .filter(|(k, _)| !k.ends_with("manifest.json"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    };
    let (one, four) = (artifacts(&a), artifacts(&c));
    let diff: Vec<&String> = one
        .keys()
        .chain(four.keys())
        .filter(|k| one.get(*k) != four.get(*k))
        .collect();
    check(
        diff.is_empty(),
        format!(
            "{} files identical across reruns; {} artifacts identical for --jobs 1 and 4{}",
            a.len(),
            one.len(),
            if diff.is_empty() {
                String::new()
            } else {
                format!("; differing: {diff:?}")
            }
        ),
    )
}

/// Criteria whose thresholds cannot be met by a correct implementation.
/// Criterion 8 asks that backward elimination at 0.05 drop all four noise
/// columns in 95% of replications; each noise column survives with
/// probability near 0.05, so the joint rate is close to 0.95^4.
const KNOWN_FAILURES: [usize; 1] = [8];

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("fit statistics", fit_statistics),
        ("likelihood-ratio tests", likelihood_ratios),
        ("route feature oracle", feature_oracle),
        ("path-size oracle", path_size_oracle),
        ("parameter recovery", recovery),
        ("oracle equivalence", oracle_equivalence),
        ("stepwise search", search_correctness),
        ("regression suite", mlr_suite),
        ("trajectory metrics", trajectory_round_trip),
        ("route set generation", bfs_le_routes),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                failed.push(i + 1);
                let note = if KNOWN_FAILURES.contains(&(i + 1)) {
                    " [known failure]"
                } else {
                    ""
                };
                println!("FAIL {:>2} {name}: {detail} ({secs:.1} s){note}", i + 1);
            }
        }
    }
    let unexpected: Vec<usize> = failed
        .iter()
        .copied()
        .filter(|c| !KNOWN_FAILURES.contains(c))
        .collect();
    println!(
        "{} of {} criteria passed; failed {:?}, of which unexpected {:?}",
        criteria.len() - failed.len(),
        criteria.len(),
        failed,
        unexpected
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
