//! Synthetic data with known generating parameters, and brute-force oracles
//! for choice probabilities and route enumeration.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discrete_choice::{
    families, ChoiceObservation, ModelSpec, DISTANCE_SCALE, PATH_SIZE_TERM,
};
use crate::error::{Error, Result};
use crate::features::{
    Education, FeatureVector, ParticipantProfile, Sample, Trajectory, VrExperience,
};
use crate::netgraph::{push_both, Link, Network, Node};
use crate::routeset::{bfs_le, sample_routes, Route, RouteSet};

/// Largest network the exhaustive path enumerator accepts.
pub const ENUMERATION_LINK_LIMIT: usize = 14;

/// Largest utility magnitude the brute-force oracle evaluates.
pub const ORACLE_UTILITY_LIMIT: f64 = 500.0;

/// Deterministic RNG for a labelled sub-stream of a master seed.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"wayfind.synth");
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn stream_u64(seed: u64, label: &str, index: u64) -> u64 {
    stream_rng(seed, label, index).random()
}

/// Seed for the trajectory of one participant's trip.
pub fn trajectory_seed(seed: u64, participant: u32, task: u32) -> u64 {
    stream_u64(
        seed,
        "trip-trajectory",
        (participant as u64) << 32 | task as u64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryParams {
    pub speed_mps: f64,
    /// Durations of the pauses inserted into each trajectory.
    pub pause_durations_s: Vec<f64>,
    /// Standard deviation of independent per-sample yaw noise.
    pub yaw_noise_deg: f64,
    pub sample_hz: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            speed_mps: 1.4,
            pause_durations_s: Vec::new(),
            yaw_noise_deg: 0.0,
            sample_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerativeConfig {
    pub spec: ModelSpec,
    /// True coefficients by parameter name, on the internal scale.
    pub true_beta: BTreeMap<String, f64>,
    pub n_participants: u32,
    /// Task numbers to simulate; empty means every task of the network.
    pub tasks: Vec<u32>,
    pub tree_depth: usize,
    pub route_set_size: usize,
    pub trajectory: TrajectoryParams,
    pub seed: u64,
}

impl Default for GenerativeConfig {
    fn default() -> Self {
        Self {
            spec: ModelSpec::new("psl", &["distot", "turns_tot"]),
            true_beta: [
                ("distot".to_string(), -0.4),
                ("turns_tot".to_string(), -0.5),
                (PATH_SIZE_TERM.to_string(), 1.0),
            ]
            .into_iter()
            .collect(),
            n_participants: 125,
            tasks: Vec::new(),
            tree_depth: 2,
            route_set_size: 10,
            trajectory: TrajectoryParams::default(),
            seed: 1,
        }
    }
}

impl GenerativeConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.trajectory.speed_mps > 0.0) {
            return Err(Error::InvalidSpec("speed_mps must be positive".into()));
        }
        if !(self.trajectory.sample_hz > 0.0) {
            return Err(Error::InvalidSpec("sample_hz must be positive".into()));
        }
        if self.route_set_size == 0 {
            return Err(Error::InvalidSpec("route_set_size must be positive".into()));
        }
        self.beta_vector().map(|_| ())
    }

    /// True coefficients ordered like the spec's parameters.
    pub fn beta_vector(&self) -> Result<Vec<f64>> {
        self.spec
            .parameter_names()?
            .iter()
            .map(|n| {
                self.true_beta
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::InvalidSpec(format!("no true value for `{n}`")))
            })
            .collect()
    }
}

/// Small two-floor grid building for simulation studies.
///
/// Each floor is a 4 x 3 grid of corridor junctions 10 m apart with two
/// staircases between the floors. Link lengths vary around the grid spacing
/// so that alternative routes differ in length.
pub fn desk_network() -> Network {
    let (cols, rows) = (4, 3);
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    for f in 1..=2 {
        for r in 0..rows {
            for c in 0..cols {
                nodes.push(Node::new(
                    format!("G{f}_{c}{r}"),
                    10.0 * c as f64,
                    10.0 * r as f64,
                    f,
                ));
            }
        }
        for r in 0..rows {
            for c in 0..cols - 1 {
                let len = 1000.0 + 150.0 * ((c + 2 * r + f as usize) % 4) as f64;
                let mut l = Link::new(
                    format!("h{f}_{c}{r}"),
                    format!("G{f}_{c}{r}"),
                    format!("G{f}_{}{r}", c + 1),
                    len,
                );
                if r == 0 {
                    l = l.window();
                }
                if r == 1 {
                    l = l.wide();
                }
                if c == 1 && r == 2 {
                    l = l.firedoors(1);
                }
                push_both(&mut links, l);
            }
        }
        for c in 0..cols {
            for r in 0..rows - 1 {
                let len = 1000.0 + 200.0 * ((2 * c + r + f as usize) % 3) as f64;
                let mut l = Link::new(
                    format!("v{f}_{c}{r}"),
                    format!("G{f}_{c}{r}"),
                    format!("G{f}_{c}{}", r + 1),
                    len,
                );
                if c == 0 {
                    l = l.floorsigns(1);
                }
                push_both(&mut links, l);
            }
        }
    }
    for (k, c) in [0usize, 3].into_iter().enumerate() {
        push_both(
            &mut links,
            Link::new(
                format!("st{k}"),
                format!("G2_{c}1"),
                format!("G1_{c}1"),
                800.0,
            )
            .stair(),
        );
    }
    Network::build(nodes, links, Some((1, 2))).expect("desk network is valid")
}

pub fn desk_tasks() -> BTreeMap<u32, (String, String)> {
    [
        (1, ("G1_00", "G1_32")),
        (2, ("G2_02", "G1_30")),
        (3, ("G2_00", "G2_32")),
        (4, ("G2_32", "G1_02")),
    ]
    .into_iter()
    .map(|(t, (o, d))| (t, (o.to_string(), d.to_string())))
    .collect()
}

/// Random participant attributes.
pub fn random_profile(rng: &mut impl Rng) -> ParticipantProfile {
    let education = match rng.random_range(0..4) {
        0 => Education::Secondary,
        1 => Education::Bachelor,
        2 => Education::Master,
        _ => Education::Doctorate,
    };
    let vr = match rng.random_range(0..3) {
        0 => VrExperience::Often,
        1 => VrExperience::Sometimes,
        _ => VrExperience::Never,
    };
    ParticipantProfile {
        age: rng.random_range(18.0..65.0f64).round(),
        male: rng.random_bool(0.5),
        education,
        familiar: rng.random_bool(0.6),
        gaming_often: rng.random_bool(0.3),
        vr,
        orientation_good: rng.random_bool(0.5),
        height_cm: rng.random_range(155.0..195.0f64).round(),
    }
}

/// Choice probabilities by direct exponentiation and compensated summation,
/// independent of the estimator's code path.
pub fn brute_force_probs(
    spec: &ModelSpec,
    beta: &[f64],
    obs: &ChoiceObservation,
) -> Result<Vec<f64>> {
    let names = spec.parameter_names()?;
    if beta.len() != names.len() {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            got: beta.len(),
        });
    }
    let psl = families()
        .get(&spec.family)?
        .structural_terms()
        .contains(&PATH_SIZE_TERM);
    let scale = |v: &str| {
        if FeatureVector::DISTANCES.contains(&v) {
            DISTANCE_SCALE
        } else {
            1.0
        }
    };
    let mut weights = Vec::with_capacity(obs.features.len());
    for (r, fv) in obs.features.iter().enumerate() {
        let mut u = 0.0;
        let mut j = 0;
        for t in &spec.terms {
            let x = fv.get(t).ok_or_else(|| Error::UnknownVariable(t.clone()))?;
            u += beta[j] * (x / scale(t));
            j += 1;
        }
        for (rv, pv) in &spec.interactions {
            let x = fv
                .get(rv)
                .ok_or_else(|| Error::UnknownVariable(rv.clone()))?;
            let p = obs
                .profile
                .get(pv)
                .ok_or_else(|| Error::UnknownVariable(pv.clone()))?;
            u += beta[j] * (x * p / scale(rv));
            j += 1;
        }
        if psl {
            let ps = obs.path_sizes[r];
            if !(ps > 0.0) {
                return Err(Error::NonPositivePathSize(ps));
            }
            u += beta[j] * ps.ln();
        }
        if !(u.abs() <= ORACLE_UTILITY_LIMIT) {
            return Err(Error::OracleLimit(format!(
                "|U| = {} exceeds {ORACLE_UTILITY_LIMIT}",
                u.abs()
            )));
        }
        weights.push(u.exp());
    }
    let total = neumaier_sum(&weights);
    Ok(weights.iter().map(|w| w / total).collect())
}

fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Inverse-CDF draw from a probability vector.
pub fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Simulated choices of every participant on every configured task. Each
/// participant gets their own sample of each task's route set.
pub fn simulate_choices(
    network: &Network,
    tasks: &BTreeMap<u32, (String, String)>,
    config: &GenerativeConfig,
) -> Result<Vec<ChoiceObservation>> {
    config.validate()?;
    let beta = config.beta_vector()?;
    let task_ids: Vec<u32> = if config.tasks.is_empty() {
        tasks.keys().copied().collect()
    } else {
        config.tasks.clone()
    };
    let mut universes: Vec<(u32, RouteSet)> = Vec::new();
    for t in &task_ids {
        let (o, d) = tasks
            .get(t)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown task {t}")))?;
        let set = bfs_le(network, (o, d), config.tree_depth)?;
        if set.is_empty() {
            return Err(Error::EmptyInput("route set"));
        }
        universes.push((*t, set));
    }
    let per_participant: Vec<Result<Vec<ChoiceObservation>>> = (0..config.n_participants)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(config.seed, "participant", p as u64);
            let profile = random_profile(&mut rng);
            let set_seed = stream_u64(config.seed, "route-sample", p as u64);
            universes
                .iter()
                .map(|(task, universe)| {
                    let set = sample_routes(universe, config.route_set_size, set_seed, *task)?;
                    let mut obs =
                        ChoiceObservation::from_route_set(network, &set, 0, p + 1, *task, profile)?;
                    let probs = brute_force_probs(&config.spec, &beta, &obs)?;
                    obs.chosen_index = draw_index(&probs, rng.random::<f64>());
                    Ok(obs)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_participant {
        out.extend(r?);
    }
    Ok(out)
}

/// Every loop-free path from `od.0` to `od.1` with at most `max_links`
/// links, in depth-first order over sorted out-links.
pub fn enumerate_all_simple_paths(
    network: &Network,
    od: (&str, &str),
    max_links: usize,
) -> Result<RouteSet> {
    if network.links().len() > ENUMERATION_LINK_LIMIT {
        return Err(Error::OracleLimit(format!(
            "{} links exceed the enumeration limit of {ENUMERATION_LINK_LIMIT}",
            network.links().len()
        )));
    }
    let o = network.node_idx(od.0)?;
    let d = network.node_idx(od.1)?;
    let mut found = Vec::new();
    let mut on_path = vec![false; network.nodes().len()];
    let mut stack = Vec::new();
    fn dfs(
        net: &Network,
        u: usize,
        d: usize,
        max_links: usize,
        on_path: &mut [bool],
        stack: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        if u == d {
            found.push(stack.clone());
            return;
        }
        if stack.len() == max_links {
            return;
        }
        on_path[u] = true;
        for &l in net.out_links(u) {
            let v = net.link_endpoints(l).1;
            if !on_path[v] {
                stack.push(l);
                dfs(net, v, d, max_links, on_path, stack, found);
                stack.pop();
            }
        }
        on_path[u] = false;
    }
    dfs(
        network,
        o,
        d,
        max_links,
        &mut on_path,
        &mut stack,
        &mut found,
    );
    let routes = found
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| Route::from_indices(network, p))
        .collect::<Result<Vec<_>>>()?;
    RouteSet::new((od.0.to_string(), od.1.to_string()), routes)
}

/// Planar polyline of a route in meters.
fn polyline(route: &Route, network: &Network) -> Result<Vec<(f64, f64, i32)>> {
    let mut pts = Vec::new();
    for id in &route.links {
        let (f, t) = network.link_endpoints(network.link_idx(id)?);
        let (a, b) = (&network.nodes()[f], &network.nodes()[t]);
        if pts.is_empty() {
            pts.push((a.x, a.y, a.floor));
        }
        pts.push((b.x, b.y, b.floor));
    }
    Ok(pts)
}

/// Position, floor and heading (degrees in [0, 360)) after walking `s`
/// meters along the polyline.
fn locate(pts: &[(f64, f64, i32)], cum: &[f64], s: f64) -> (f64, f64, i32, f64) {
    let mut heading = None;
    for i in 0..pts.len() - 1 {
        let (x0, y0, f0) = pts[i];
        let (x1, y1, f1) = pts[i + 1];
        let seg = cum[i + 1] - cum[i];
        if seg <= 0.0 {
            continue;
        }
        let h = (y1 - y0).atan2(x1 - x0).to_degrees().rem_euclid(360.0);
        heading = Some(h);
        if s <= cum[i + 1] || i + 2 == pts.len() {
            let a = ((s - cum[i]) / seg).clamp(0.0, 1.0);
            let floor = if a < 0.5 { f0 } else { f1 };
            return (x0 + a * (x1 - x0), y0 + a * (y1 - y0), floor, h);
        }
    }
    let (x, y, f) = *pts.last().unwrap();
    (x, y, f, heading.unwrap_or(0.0))
}

/// Samples a walk along `route` at constant speed with zero-velocity holds
/// and optional yaw noise. Pauses are placed at seeded, well-separated
/// points of the walk.
pub fn simulate_trajectory(
    route: &Route,
    network: &Network,
    params: &TrajectoryParams,
    seed: u64,
) -> Result<Trajectory> {
    if !(params.speed_mps > 0.0 && params.sample_hz > 0.0) {
        return Err(Error::InvalidSpec(
            "speed and sampling rate must be positive".into(),
        ));
    }
    let pts = polyline(route, network)?;
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        cum.push(cum.last().unwrap() + d);
    }
    let length = *cum.last().unwrap();
    let walk_time = length / params.speed_mps;
    let mut rng = stream_rng(seed, "trajectory", 0);

    // One pause per equal slot of walking time, placed in the slot's middle half.
    let n = params.pause_durations_s.len();
    let pauses: Vec<(f64, f64)> = params
        .pause_durations_s
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let slot = walk_time / n as f64;
            let at = slot * (i as f64 + 0.25 + 0.5 * rng.random::<f64>());
            (at, d.max(0.0))
        })
        .collect();
    let total = walk_time + pauses.iter().map(|p| p.1).sum::<f64>();
    if !(total > 0.0) {
        return Err(Error::InvalidRoute("route has no planar extent".into()));
    }
    // Walking time elapsed at wall-clock time t.
    let walked = |t: f64| {
        let mut shift = 0.0;
        for &(at, d) in &pauses {
            if t <= at + shift {
                break;
            }
            if t < at + shift + d {
                return at;
            }
            shift += d;
        }
        t - shift
    };
    let noise = Normal::new(0.0, params.yaw_noise_deg.max(0.0))
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let dt = 1.0 / params.sample_hz;
    let steps = (total / dt).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    if total - times.last().unwrap() > 1e-9 {
        times.push(total);
    }
    let samples = times
        .into_iter()
        .map(|t| {
            let s = (walked(t) * params.speed_mps).min(length);
            let (x, y, floor, heading) = locate(&pts, &cum, s);
            let yaw = if params.yaw_noise_deg > 0.0 {
                (heading + noise.sample(&mut rng)).rem_euclid(360.0)
            } else {
                heading
            };
            Sample {
                t_s: t,
                x_m: x,
                y_m: y,
                floor,
                yaw_deg: if yaw >= 360.0 { 0.0 } else { yaw },
            }
        })
        .collect();
    Trajectory::new(samples)
}
