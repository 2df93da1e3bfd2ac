//! Directed multi-floor building network and shortest-path queries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    /// Planar position in meters.
    pub x: f64,
    pub y: f64,
    pub floor: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_cm: f64,
    #[serde(default)]
    pub is_stair: bool,
    #[serde(default)]
    pub is_wide: bool,
    #[serde(default)]
    pub has_window: bool,
    #[serde(default)]
    pub firedoor_count: u32,
    #[serde(default)]
    pub floorsign_count: u32,
}

impl Node {
    pub fn new(id: impl Into<String>, x: f64, y: f64, floor: i32) -> Self {
        Self {
            id: id.into(),
            x,
            y,
            floor,
        }
    }
}

impl Link {
    /// Plain corridor link without attribute flags.
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length_cm: f64,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length_cm,
            is_stair: false,
            is_wide: false,
            has_window: false,
            firedoor_count: 0,
            floorsign_count: 0,
        }
    }

    pub fn stair(mut self) -> Self {
        self.is_stair = true;
        self
    }

    pub fn wide(mut self) -> Self {
        self.is_wide = true;
        self
    }

    pub fn window(mut self) -> Self {
        self.has_window = true;
        self
    }

    pub fn firedoors(mut self, n: u32) -> Self {
        self.firedoor_count = n;
        self
    }

    pub fn floorsigns(mut self, n: u32) -> Self {
        self.floorsign_count = n;
        self
    }

    /// Opposite-direction copy with `id` and identical attributes.
    pub fn reversed(&self, id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            from: self.to.clone(),
            to: self.from.clone(),
            ..self.clone()
        }
    }
}

/// Validated, immutable building network.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    floor_range: (i32, i32),
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    link_from: Vec<usize>,
    link_to: Vec<usize>,
    /// Outgoing link indices per node, sorted by link id.
    out_links: Vec<Vec<usize>>,
    /// Position of each link in lexicographic id order.
    link_rank: Vec<usize>,
}

impl Network {
    /// Validates inputs and builds the adjacency index.
    ///
    /// `floor_range` defaults to the span of node floors.
    pub fn build(
        nodes: Vec<Node>,
        links: Vec<Link>,
        floor_range: Option<(i32, i32)>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyInput("network has no nodes"));
        }
        if links.is_empty() {
            return Err(Error::EmptyInput("network has no links"));
        }
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "node",
                    id: n.id.clone(),
                });
            }
        }
        let (lo, hi) = floor_range.unwrap_or_else(|| {
            let lo = nodes.iter().map(|n| n.floor).min().unwrap_or(0);
            let hi = nodes.iter().map(|n| n.floor).max().unwrap_or(0);
            (lo, hi)
        });
        for n in &nodes {
            if n.floor < lo || n.floor > hi {
                return Err(Error::FloorOutOfRange {
                    node: n.id.clone(),
                    floor: n.floor,
                    lo,
                    hi,
                });
            }
        }

        let mut link_index = HashMap::with_capacity(links.len());
        let mut link_from = Vec::with_capacity(links.len());
        let mut link_to = Vec::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "link",
                    id: l.id.clone(),
                });
            }
            let from = *node_index
                .get(&l.from)
                .ok_or_else(|| Error::DanglingEndpoint {
                    link: l.id.clone(),
                    node: l.from.clone(),
                })?;
            let to = *node_index
                .get(&l.to)
                .ok_or_else(|| Error::DanglingEndpoint {
                    link: l.id.clone(),
                    node: l.to.clone(),
                })?;
            if !(l.length_cm.is_finite() && l.length_cm > 0.0) {
                return Err(Error::InvalidLink {
                    link: l.id.clone(),
                    reason: format!("length_cm must be positive, got {}", l.length_cm),
                });
            }
            if from == to {
                return Err(Error::InvalidLink {
                    link: l.id.clone(),
                    reason: "self-loop".into(),
                });
            }
            let df = (nodes[from].floor - nodes[to].floor).abs();
            if l.is_stair && df != 1 {
                return Err(Error::InvalidLink {
                    link: l.id.clone(),
                    reason: format!("stair link spans {df} floors, expected 1"),
                });
            }
            if !l.is_stair && df != 0 {
                return Err(Error::InvalidLink {
                    link: l.id.clone(),
                    reason: "non-stair link connects different floors".into(),
                });
            }
            link_from.push(from);
            link_to.push(to);
        }

        let mut order: Vec<usize> = (0..links.len()).collect();
        order.sort_by(|&a, &b| links[a].id.cmp(&links[b].id));
        let mut link_rank = vec![0; links.len()];
        for (rank, &li) in order.iter().enumerate() {
            link_rank[li] = rank;
        }
        let mut out_links = vec![Vec::new(); nodes.len()];
        for &li in &order {
            out_links[link_from[li]].push(li);
        }

        Ok(Self {
            nodes,
            links,
            floor_range: (lo, hi),
            node_index,
            link_index,
            link_from,
            link_to,
            out_links,
            link_rank,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn floor_range(&self) -> (i32, i32) {
        self.floor_range
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.link_index.get(id).map(|&i| &self.links[i])
    }

    pub fn node_idx(&self, id: &str) -> Result<usize> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn link_idx(&self, id: &str) -> Result<usize> {
        self.link_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownLink(id.to_string()))
    }

    pub fn link_endpoints(&self, link: usize) -> (usize, usize) {
        (self.link_from[link], self.link_to[link])
    }

    /// Outgoing links of a node, in link-id order.
    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn adjacency_len(&self) -> usize {
        self.out_links.iter().map(Vec::len).sum()
    }

    /// Shortest path by `length_cm`; ties go to the lexicographically
    /// smallest link-id sequence.
    pub fn shortest_path(&self, origin: &str, destination: &str) -> Result<Vec<usize>> {
        self.shortest_path_avoiding(origin, destination, &[])
    }

    /// Shortest path with the links flagged in `blocked` (indexed by link
    /// index; shorter slices block nothing past their end) removed.
    pub fn shortest_path_avoiding(
        &self,
        origin: &str,
        destination: &str,
        blocked: &[bool],
    ) -> Result<Vec<usize>> {
        let o = self.node_idx(origin)?;
        let d = self.node_idx(destination)?;
        self.dijkstra(o, d, blocked)
            .ok_or_else(|| Error::Unreachable {
                origin: origin.to_string(),
                destination: destination.to_string(),
            })
    }

    pub(crate) fn dijkstra(&self, o: usize, d: usize, blocked: &[bool]) -> Option<Vec<usize>> {
        if o == d {
            return Some(Vec::new());
        }
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        // Path to each node as link ranks; compared lexicographically on ties.
        let mut path: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[o] = 0.0;
        heap.push(QueueItem { dist: 0.0, node: o });
        while let Some(QueueItem { dist: du, node: u }) = heap.pop() {
            if done[u] || du > dist[u] {
                continue;
            }
            done[u] = true;
            if u == d {
                break;
            }
            for &li in &self.out_links[u] {
                if blocked.get(li).copied().unwrap_or(false) {
                    continue;
                }
                let v = self.link_to[li];
                if done[v] {
                    continue;
                }
                let nd = du + self.links[li].length_cm;
                let better = if nd < dist[v] && !same_length(nd, dist[v]) {
                    true
                } else if same_length(nd, dist[v]) {
                    let rank = self.link_rank[li];
                    lex_less(&path[u], rank, &path[v])
                } else {
                    false
                };
                if better {
                    dist[v] = nd.min(dist[v]);
                    let mut p = path[u].clone();
                    p.push(self.link_rank[li]);
                    path[v] = p;
                    heap.push(QueueItem { dist: nd, node: v });
                }
            }
        }
        if !done[d] {
            return None;
        }
        // Map ranks back to link indices.
        let mut by_rank = vec![0; self.links.len()];
        for (li, &r) in self.link_rank.iter().enumerate() {
            by_rank[r] = li;
        }
        Some(path[d].iter().map(|&r| by_rank[r]).collect())
    }

    pub fn path_length(&self, links: &[usize]) -> f64 {
        links.iter().map(|&l| self.links[l].length_cm).sum()
    }

    pub fn link_ids(&self, links: &[usize]) -> Vec<String> {
        links.iter().map(|&l| self.links[l].id.clone()).collect()
    }

    /// Network file representation.
    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            floor_range: Some(self.floor_range),
            nodes: self.nodes.clone(),
            links: self.links.clone(),
        }
    }

    /// Parses a network JSON document. With `strict`, unknown fields at any
    /// level are rejected.
    pub fn from_json(text: &str, strict: bool) -> Result<Self> {
        let file: NetworkFile = if strict {
            let raw: StrictNetworkFile = serde_json::from_str(text)?;
            raw.into()
        } else {
            serde_json::from_str(text)?
        };
        Self::build(file.nodes, file.links, file.floor_range)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network serializes")
    }
}

fn same_length(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// `prefix ++ [last] < other` in lexicographic order.
fn lex_less(prefix: &[usize], last: usize, other: &[usize]) -> bool {
    let candidate = prefix.iter().copied().chain(std::iter::once(last));
    let mut other = other.iter().copied();
    for c in candidate {
        match other.next() {
            None => return false,
            Some(o) if c < o => return true,
            Some(o) if c > o => return false,
            _ => {}
        }
    }
    other.next().is_some()
}

#[derive(Debug, PartialEq)]
struct QueueItem {
    dist: f64,
    node: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// On-disk network document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_range: Option<(i32, i32)>,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictNode {
    id: String,
    x: f64,
    y: f64,
    floor: i32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictLink {
    id: String,
    from: String,
    to: String,
    length_cm: f64,
    #[serde(default)]
    is_stair: bool,
    #[serde(default)]
    is_wide: bool,
    #[serde(default)]
    has_window: bool,
    #[serde(default)]
    firedoor_count: u32,
    #[serde(default)]
    floorsign_count: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictNetworkFile {
    #[serde(default)]
    floor_range: Option<(i32, i32)>,
    nodes: Vec<StrictNode>,
    links: Vec<StrictLink>,
}

impl From<StrictNetworkFile> for NetworkFile {
    fn from(s: StrictNetworkFile) -> Self {
        NetworkFile {
            floor_range: s.floor_range,
            nodes: s
                .nodes
                .into_iter()
                .map(|n| Node::new(n.id, n.x, n.y, n.floor))
                .collect(),
            links: s
                .links
                .into_iter()
                .map(|l| Link {
                    id: l.id,
                    from: l.from,
                    to: l.to,
                    length_cm: l.length_cm,
                    is_stair: l.is_stair,
                    is_wide: l.is_wide,
                    has_window: l.has_window,
                    firedoor_count: l.firedoor_count,
                    floorsign_count: l.floorsign_count,
                })
                .collect(),
        }
    }
}

/// Adds a corridor segment in both directions; ids are `<id>` and `<id>r`.
pub(crate) fn push_both(links: &mut Vec<Link>, link: Link) {
    let rev = link.reversed(format!("{}r", link.id));
    links.push(link);
    links.push(rev);
}

// Per-segment length offsets (cm); the as-built corridors are not uniform.
const DN: [f64; 4] = [0.0, 40.0, 15.0, 60.0];
const DS: [f64; 4] = [30.0, 0.0, 50.0, 10.0];
const DC: [f64; 5] = [0.0, 35.0, 10.0, 55.0, 20.0];
const DST: [f64; 5] = [0.0, 25.0, 50.0, 15.0, 40.0];
// Extra walking distance of a bay or niche over the corridor it bypasses.
const LOGGIA_EXTRA: f64 = 4.0;
const NICHE_EXTRA: f64 = 6.0;

/// Good-faith reconstruction of the four-floor faculty building.
///
/// Floors 2..=4 are office floors and floor 1 is the exit floor. Every floor
/// has a north and a south main corridor (100 m long, 20 m apart) joined by
/// five cross corridors, each with a scissor staircase (two flights per
/// storey), and by four open study areas between them. The north corridor
/// carries the windows and a row of furnished loggia bays; the south
/// corridor has information niches. Fire doors sit in both main corridors.
/// Rooms used by the four wayfinding tasks hang off the corridors, and the
/// exit floor has eight exits `E1`..`E8`.
///
/// Exact dimensions were never published; the geometry preserves the
/// topology (two corridors, five staircases per floor, three intermediate
/// floors plus an exit floor). Elevators are omitted.
pub fn replica_building() -> Network {
    let xs = [0.0, 25.0, 50.0, 75.0, 100.0];
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    for f in 1..=4 {
        for (i, &x) in xs.iter().enumerate() {
            nodes.push(Node::new(format!("N{f}_{i}"), x, 20.0, f));
            nodes.push(Node::new(format!("S{f}_{i}"), x, 0.0, f));
            // cross-corridor stair hall and its landing
            nodes.push(Node::new(format!("C{f}_{i}"), x, 10.0, f));
            nodes.push(Node::new(format!("D{f}_{i}"), x + 5.0, 10.0, f));
        }
        for i in 0..4 {
            // mid-corridor nodes split each segment in two
            let xm = (xs[i] + xs[i + 1]) / 2.0;
            nodes.push(Node::new(format!("NM{f}_{i}"), xm, 20.0, f));
            nodes.push(Node::new(format!("SM{f}_{i}"), xm, 0.0, f));
            let door = u32::from(i == 1 || i == 2);
            push_both(
                &mut links,
                Link::new(
                    format!("n{f}_{i}a"),
                    format!("N{f}_{i}"),
                    format!("NM{f}_{i}"),
                    1250.0 + DN[i],
                )
                .wide()
                .window()
                .firedoors(door),
            );
            push_both(
                &mut links,
                Link::new(
                    format!("n{f}_{i}b"),
                    format!("NM{f}_{i}"),
                    format!("N{f}_{}", i + 1),
                    1250.0 + DN[(i + 2) % 4],
                )
                .wide()
                .window(),
            );
            push_both(
                &mut links,
                Link::new(
                    format!("s{f}_{i}a"),
                    format!("S{f}_{i}"),
                    format!("SM{f}_{i}"),
                    1250.0 + DS[i],
                )
                .wide()
                .firedoors(door),
            );
            push_both(
                &mut links,
                Link::new(
                    format!("s{f}_{i}b"),
                    format!("SM{f}_{i}"),
                    format!("S{f}_{}", i + 1),
                    1250.0 + DS[(i + 1) % 4],
                )
                .wide(),
            );
        }
        for i in 0..4 {
            // open study area joining the corridors between staircases
            let xm = (xs[i] + xs[i + 1]) / 2.0;
            nodes.push(Node::new(format!("CM{f}_{i}"), xm, 10.0, f));
            push_both(
                &mut links,
                Link::new(
                    format!("cmn{f}_{i}"),
                    format!("NM{f}_{i}"),
                    format!("CM{f}_{i}"),
                    1000.0,
                ),
            );
            push_both(
                &mut links,
                Link::new(
                    format!("cms{f}_{i}"),
                    format!("CM{f}_{i}"),
                    format!("SM{f}_{i}"),
                    1000.0,
                ),
            );
        }
        for i in 0..4 {
            // furnished loggia bays on the window side, one per half segment
            let xm = (xs[i] + xs[i + 1]) / 2.0;
            let hn = [1250.0 + DN[i], 1250.0 + DN[(i + 2) % 4]];
            let hs = [1250.0 + DS[i], 1250.0 + DS[(i + 1) % 4]];
            for (half, (from, to, x)) in [
                (
                    format!("N{f}_{i}"),
                    format!("NM{f}_{i}"),
                    (xs[i] + xm) / 2.0,
                ),
                (
                    format!("NM{f}_{i}"),
                    format!("N{f}_{}", i + 1),
                    (xm + xs[i + 1]) / 2.0,
                ),
            ]
            .into_iter()
            .enumerate()
            {
                let bay = format!("L{f}_{i}{half}");
                nodes.push(Node::new(bay.clone(), x, 26.0, f));
                push_both(
                    &mut links,
                    Link::new(
                        format!("lg{f}_{i}{half}a"),
                        from,
                        bay.clone(),
                        (hn[half] + LOGGIA_EXTRA) / 2.0,
                    )
                    .window(),
                );
                push_both(
                    &mut links,
                    Link::new(
                        format!("lg{f}_{i}{half}b"),
                        bay,
                        to,
                        (hn[half] + LOGGIA_EXTRA) / 2.0,
                    )
                    .window(),
                );
            }
            // information niches on the office side
            for (half, (from, to, x)) in [
                (
                    format!("S{f}_{i}"),
                    format!("SM{f}_{i}"),
                    (xs[i] + xm) / 2.0,
                ),
                (
                    format!("SM{f}_{i}"),
                    format!("S{f}_{}", i + 1),
                    (xm + xs[i + 1]) / 2.0,
                ),
            ]
            .into_iter()
            .enumerate()
            {
                let niche = format!("Q{f}_{i}{half}");
                nodes.push(Node::new(niche.clone(), x, -6.0, f));
                push_both(
                    &mut links,
                    Link::new(
                        format!("nq{f}_{i}{half}a"),
                        from,
                        niche.clone(),
                        (hs[half] + NICHE_EXTRA) / 2.0,
                    ),
                );
                push_both(
                    &mut links,
                    Link::new(
                        format!("nq{f}_{i}{half}b"),
                        niche,
                        to,
                        (hs[half] + NICHE_EXTRA) / 2.0,
                    ),
                );
            }
        }
        for i in 0..5 {
            push_both(
                &mut links,
                Link::new(
                    format!("cn{f}_{i}"),
                    format!("N{f}_{i}"),
                    format!("C{f}_{i}"),
                    1000.0 + DC[i],
                ),
            );
            push_both(
                &mut links,
                Link::new(
                    format!("cs{f}_{i}"),
                    format!("C{f}_{i}"),
                    format!("S{f}_{i}"),
                    1000.0 + DC[4 - i],
                ),
            );
            push_both(
                &mut links,
                Link::new(
                    format!("ld{f}_{i}"),
                    format!("C{f}_{i}"),
                    format!("D{f}_{i}"),
                    500.0,
                )
                .floorsigns(1),
            );
            // scissor stair: second flight lands on the opposite side of the hall
            nodes.push(Node::new(format!("K{f}_{i}"), xs[i] - 5.0, 10.0, f));
            push_both(
                &mut links,
                Link::new(
                    format!("lk{f}_{i}"),
                    format!("C{f}_{i}"),
                    format!("K{f}_{i}"),
                    500.0,
                )
                .floorsigns(1),
            );
            if f > 1 {
                push_both(
                    &mut links,
                    Link::new(
                        format!("sx{f}_{i}"),
                        format!("C{f}_{i}"),
                        format!("K{}_{i}", f - 1),
                        803.0 + DST[(i + f as usize) % 5],
                    )
                    .stair(),
                );
                // descending flight: hall on f to landing on f-1
                push_both(
                    &mut links,
                    Link::new(
                        format!("st{f}_{i}"),
                        format!("C{f}_{i}"),
                        format!("D{}_{i}", f - 1),
                        800.0 + DST[(i + f as usize) % 5],
                    )
                    .stair(),
                );
            }
        }
    }
    // rooms
    let rooms = [
        ("R4_02", "N4_0", -4.0, 24.0, 4),
        ("R4_99", "S4_4", 104.0, -4.0, 4),
        ("R2_02", "N2_0", -4.0, 24.0, 2),
        ("R4_64", "N4_3", 75.0, 24.0, 4),
    ];
    for (id, at, x, y, f) in rooms {
        nodes.push(Node::new(id, x, y, f));
        push_both(&mut links, Link::new(format!("door_{id}"), at, id, 400.0));
    }
    // eight exits on the ground floor, two per corridor end plus four mid
    let exits = [
        "N1_0", "S1_0", "N1_4", "S1_4", "NM1_0", "SM1_1", "NM1_2", "SM1_3",
    ];
    for (k, at) in exits.iter().enumerate() {
        let node = format!("E{}", k + 1);
        let n = nodes.iter().find(|n| n.id == *at).unwrap().clone();
        let (ex, ey) = if n.y > 10.0 {
            (n.x, n.y + 3.0)
        } else {
            (n.x, n.y - 3.0)
        };
        nodes.push(Node::new(node.clone(), ex, ey, 1));
        push_both(
            &mut links,
            Link::new(format!("exit{}", k + 1), *at, node, 300.0),
        );
    }
    Network::build(nodes, links, Some((1, 4))).expect("replica building is valid")
}

/// The four wayfinding assignments on [`replica_building`]: within-floor,
/// floor 4 to floor 2, a longer between-floor trip, and evacuation to the
/// main ground-floor exit `E1`.
pub fn replica_tasks() -> BTreeMap<u32, (String, String)> {
    [
        (1, ("R4_02", "R4_99")),
        (2, ("R4_99", "R2_02")),
        (3, ("R2_02", "R4_64")),
        (4, ("R4_64", "E1")),
    ]
    .into_iter()
    .map(|(t, (o, d))| (t, (o.to_string(), d.to_string())))
    .collect()
}
