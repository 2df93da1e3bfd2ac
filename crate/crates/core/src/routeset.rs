//! Route choice sets: BFS-LE generation, sampling, chosen-route correction
//! and the path-size overlap factor.

use std::collections::{BTreeMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::netgraph::Network;

/// Loop-free link sequence between an origin and a destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub links: Vec<String>,
    /// Per-link lengths, parallel to `links`.
    pub lengths_cm: Vec<f64>,
    pub total_length_cm: f64,
    pub origin: String,
    pub destination: String,
}

impl Route {
    /// Builds a route from link indices, validating connectivity and
    /// loop-freeness.
    pub fn from_indices(network: &Network, links: &[usize]) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidRoute("route has no links".into()));
        }
        let mut visited = HashSet::new();
        let (first, _) = network.link_endpoints(links[0]);
        visited.insert(first);
        let mut at = first;
        for &l in links {
            let (from, to) = network.link_endpoints(l);
            if from != at {
                return Err(Error::InvalidRoute(format!(
                    "link `{}` does not start where the previous link ended",
                    network.links()[l].id
                )));
            }
            if !visited.insert(to) {
                return Err(Error::InvalidRoute(format!(
                    "node `{}` visited twice",
                    network.nodes()[to].id
                )));
            }
            at = to;
        }
        let lengths_cm: Vec<f64> = links
            .iter()
            .map(|&l| network.links()[l].length_cm)
            .collect();
        Ok(Self {
            links: network.link_ids(links),
            total_length_cm: lengths_cm.iter().sum(),
            lengths_cm,
            origin: network.nodes()[first].id.clone(),
            destination: network.nodes()[at].id.clone(),
        })
    }

    pub fn from_ids<S: AsRef<str>>(network: &Network, ids: &[S]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| network.link_idx(id.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(network, &idx)
    }

    /// Link indices in `network`.
    pub fn indices(&self, network: &Network) -> Result<Vec<usize>> {
        self.links.iter().map(|id| network.link_idx(id)).collect()
    }

    pub fn od(&self) -> (String, String) {
        (self.origin.clone(), self.destination.clone())
    }
}

/// Routes sharing one origin-destination pair, with link incidence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RouteSetRepr", into = "RouteSetRepr")]
pub struct RouteSet {
    od: (String, String),
    routes: Vec<Route>,
    /// Number of routes in the set using each link.
    incidence: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RouteSetRepr {
    od: (String, String),
    routes: Vec<Route>,
}

impl TryFrom<RouteSetRepr> for RouteSet {
    type Error = Error;
    fn try_from(r: RouteSetRepr) -> Result<Self> {
        RouteSet::new(r.od, r.routes)
    }
}

impl From<RouteSet> for RouteSetRepr {
    fn from(s: RouteSet) -> Self {
        RouteSetRepr {
            od: s.od,
            routes: s.routes,
        }
    }
}

impl RouteSet {
    pub fn new(od: (String, String), routes: Vec<Route>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &routes {
            if r.od() != od {
                return Err(Error::OdMismatch {
                    expected: od,
                    got: r.od(),
                });
            }
            if !seen.insert(r.links.clone()) {
                return Err(Error::InvalidRoute(format!(
                    "duplicate route {:?} in set",
                    r.links
                )));
            }
        }
        let incidence = incidence_of(&routes);
        Ok(Self {
            od,
            routes,
            incidence,
        })
    }

    pub fn od(&self) -> &(String, String) {
        &self.od
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn incidence(&self, link: &str) -> usize {
        self.incidence.get(link).copied().unwrap_or(0)
    }

    pub fn position(&self, route: &Route) -> Option<usize> {
        self.routes.iter().position(|r| r.links == route.links)
    }

    /// Path-size factor of every route, in set order.
    pub fn path_sizes(&self) -> Vec<f64> {
        self.routes
            .iter()
            .map(|r| path_size_unchecked(r, self))
            .collect()
    }
}

fn incidence_of(routes: &[Route]) -> BTreeMap<String, usize> {
    let mut inc = BTreeMap::new();
    for r in routes {
        for l in &r.links {
            *inc.entry(l.clone()).or_insert(0) += 1;
        }
    }
    inc
}

/// Breadth-first search on link elimination.
///
/// Each tree node is a set of removed links. The root removes nothing; a
/// node at depth `d < tree_depth` spawns one child per link of its shortest
/// path, removing that link in addition to its own. Every feasible child
/// route not seen before is appended in generation order.
pub fn bfs_le(network: &Network, od: (&str, &str), tree_depth: usize) -> Result<RouteSet> {
    let (o, d) = od;
    let oi = network.node_idx(o)?;
    let di = network.node_idx(d)?;
    let base = network.shortest_path(o, d)?;
    if base.is_empty() {
        return Err(Error::InvalidRoute("origin equals destination".into()));
    }
    let mut routes = vec![Route::from_indices(network, &base)?];
    let mut seen_routes: HashSet<Vec<usize>> = HashSet::from([base.clone()]);
    let mut seen_removed: HashSet<Vec<usize>> = HashSet::new();
    let mut frontier: Vec<(Vec<usize>, Vec<usize>)> = vec![(base, Vec::new())];
    let mut blocked = vec![false; network.links().len()];

    for _ in 0..tree_depth {
        let mut next = Vec::new();
        for (path, removed) in &frontier {
            for &l in path {
                let mut r = removed.clone();
                r.push(l);
                r.sort_unstable();
                if !seen_removed.insert(r.clone()) {
                    continue;
                }
                for &x in &r {
                    blocked[x] = true;
                }
                let found = network.dijkstra(oi, di, &blocked);
                for &x in &r {
                    blocked[x] = false;
                }
                if let Some(p) = found {
                    if seen_routes.insert(p.clone()) {
                        routes.push(Route::from_indices(network, &p)?);
                    }
                    next.push((p, r));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    RouteSet::new((o.to_string(), d.to_string()), routes)
}

/// Seed for the per-(seed, od, task) sampling stream.
pub fn sampling_seed(seed: u64, od: &(String, String), task: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"wayfind.sample_routes");
    h.update(seed.to_le_bytes());
    h.update(od.0.as_bytes());
    h.update([0u8]);
    h.update(od.1.as_bytes());
    h.update(task.to_le_bytes());
    h.finalize().into()
}

/// Draws `k` routes uniformly without replacement, keeping their relative
/// order. Sets with at most `k` routes are returned unchanged.
pub fn sample_routes(set: &RouteSet, k: usize, seed: u64, task: u32) -> Result<RouteSet> {
    if k == 0 {
        return Err(Error::Parse("sample size must be at least 1".into()));
    }
    if set.len() <= k {
        return Ok(set.clone());
    }
    let mut rng = ChaCha8Rng::from_seed(sampling_seed(seed, &set.od, task));
    let mut picked = rand::seq::index::sample(&mut rng, set.len(), k).into_vec();
    picked.sort_unstable();
    let routes = picked.into_iter().map(|i| set.routes[i].clone()).collect();
    RouteSet::new(set.od.clone(), routes)
}

/// Guarantees the chosen route is in the set by swapping out the final
/// route when it is absent.
pub fn ensure_chosen(set: &RouteSet, chosen: &Route) -> Result<RouteSet> {
    if chosen.od() != set.od {
        return Err(Error::OdMismatch {
            expected: set.od.clone(),
            got: chosen.od(),
        });
    }
    if set.position(chosen).is_some() {
        return Ok(set.clone());
    }
    let mut routes = set.routes.clone();
    match routes.last_mut() {
        Some(last) => *last = chosen.clone(),
        None => routes.push(chosen.clone()),
    }
    RouteSet::new(set.od.clone(), routes)
}

/// Length-weighted distinctness of `route` within `set`, in (0, 1].
pub fn path_size(route: &Route, set: &RouteSet) -> Result<f64> {
    if set.position(route).is_none() {
        return Err(Error::RouteNotInSet);
    }
    Ok(path_size_unchecked(route, set))
}

/// Path size against a raw list of routes. Unlike [`RouteSet`], the list may
/// hold repeated link sequences; each copy counts toward link incidence.
pub fn path_size_in(route: &Route, routes: &[Route]) -> Result<f64> {
    if !routes.iter().any(|r| r.links == route.links) {
        return Err(Error::RouteNotInSet);
    }
    let inc = incidence_of(routes);
    Ok(weighted_share(route, |l| inc[l]))
}

fn path_size_unchecked(route: &Route, set: &RouteSet) -> f64 {
    weighted_share(route, |l| set.incidence(l).max(1))
}

/// Sum of link lengths divided by incidence, over the route length. Summing
/// before dividing keeps a route without shared links at exactly 1.
fn weighted_share(route: &Route, incidence: impl Fn(&str) -> usize) -> f64 {
    let shared: f64 = route
        .links
        .iter()
        .zip(&route.lengths_cm)
        .map(|(l, w)| w / incidence(l) as f64)
        .sum();
    shared / route.total_length_cm
}

/// JSON document emitted by `gen-routes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteSetFile {
    pub od: (String, String),
    pub task: u32,
    pub generated: usize,
    pub routes: Vec<Vec<String>>,
    pub total_length_cm: Vec<f64>,
    pub path_sizes: Vec<f64>,
}

impl RouteSetFile {
    pub fn new(set: &RouteSet, task: u32, generated: usize) -> Self {
        Self {
            od: set.od.clone(),
            task,
            generated,
            routes: set.routes.iter().map(|r| r.links.clone()).collect(),
            total_length_cm: set.routes.iter().map(|r| r.total_length_cm).collect(),
            path_sizes: set.path_sizes(),
        }
    }
}
