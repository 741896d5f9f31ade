//! Synthetic ground-truth environments.
//!
//! A [`GeoEnvironment`] is a place graph whose nodes have planar
//! coordinates, so the true action at any node can be computed from
//! geometry. Generated environments live on a jittered unit grid with
//! axis-aligned edges; the jitter is bounded so that every turn angle stays
//! well inside its quantization sector.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{normalize_angle, Action, AngleThreshold};
use crate::canonical::{CanonicalPath, NodeName};
use crate::instruction::generate_instruction;
use crate::router::{find_route, shortest_path, unit_cost_distances, RouteQuery};
use crate::topo_map::TopoMap;

/// Minimum distance between any turn angle and a sector boundary.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

/// Number of paths per dataset.
pub const DATASET_SIZE: usize = 10;

const SELECTION_ATTEMPTS: usize = 256;

const PLACE_NAMES: &[&str] = &[
    "Kitchen", "Lobby", "Hallway", "Bathroom", "Bedroom", "Living room", "Entryway", "Stairs",
    "Deck", "Dining room", "Office", "Laundry", "Garage", "Pantry", "Study", "Library", "Closet",
    "Balcony", "Porch", "Foyer", "Attic", "Basement", "Gym", "Nursery", "Den", "Corridor",
    "Landing", "Patio", "Guest room", "Workshop",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("node name {0} is used more than once")]
    DuplicateNode(String),
    #[error("node {0} has non-finite coordinates")]
    NonFinite(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("edge {0} - {1} has zero length")]
    ZeroLengthEdge(String, String),
    #[error("edge {0} - {0} is a self-loop")]
    SelfLoop(String),
    #[error("environment graph is not connected")]
    Disconnected,
    #[error("at least 2 distinct designated nodes are required, found {0}")]
    TooFewDesignated(usize),
    #[error("no edge between {0} and {1}")]
    MissingEdge(NodeName, NodeName),
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
    #[error("cannot sample a dataset: {0}")]
    Sampling(String),
    #[error("malformed environment file: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoEnvironment {
    coords: BTreeMap<NodeName, Point>,
    adjacency: BTreeMap<NodeName, BTreeSet<NodeName>>,
    designated: Vec<NodeName>,
}

impl GeoEnvironment {
    pub fn new(
        nodes: Vec<(NodeName, Point)>,
        edges: Vec<(NodeName, NodeName)>,
        designated: Vec<NodeName>,
    ) -> Result<Self, EnvError> {
        let mut coords = BTreeMap::new();
        for (name, p) in nodes {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(EnvError::NonFinite(name.to_string()));
            }
            if coords.contains_key(&name) {
                return Err(EnvError::DuplicateNode(name.to_string()));
            }
            coords.insert(name, p);
        }
        let canon = |coords: &BTreeMap<NodeName, Point>, n: &NodeName| {
            coords
                .get_key_value(n)
                .map(|(k, _)| k.clone())
                .ok_or_else(|| EnvError::UnknownNode(n.to_string()))
        };
        let mut adjacency: BTreeMap<NodeName, BTreeSet<NodeName>> =
            coords.keys().map(|n| (n.clone(), BTreeSet::new())).collect();
        for (a, b) in edges {
            let (a, b) = (canon(&coords, &a)?, canon(&coords, &b)?);
            if a == b {
                return Err(EnvError::SelfLoop(a.to_string()));
            }
            let (pa, pb) = (coords[&a], coords[&b]);
            if pa.x == pb.x && pa.y == pb.y {
                return Err(EnvError::ZeroLengthEdge(a.to_string(), b.to_string()));
            }
            adjacency.get_mut(&a).unwrap().insert(b.clone());
            adjacency.get_mut(&b).unwrap().insert(a);
        }
        let mut seen = BTreeSet::new();
        let mut canonical_designated = Vec::new();
        for d in designated {
            let d = canon(&coords, &d)?;
            if seen.insert(d.clone()) {
                canonical_designated.push(d);
            }
        }
        if canonical_designated.len() < 2 {
            return Err(EnvError::TooFewDesignated(canonical_designated.len()));
        }
        let env = GeoEnvironment { coords, adjacency, designated: canonical_designated };
        let first = env.coords.keys().next().expect("designated nodes exist");
        if unit_cost_distances(|n| env.neighbor_vec(n), first).len() != env.coords.len() {
            return Err(EnvError::Disconnected);
        }
        Ok(env)
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeName, Point)> {
        self.coords.iter().map(|(n, &p)| (n, p))
    }

    pub fn designated(&self) -> &[NodeName] {
        &self.designated
    }

    pub fn position(&self, node: &NodeName) -> Option<Point> {
        self.coords.get(node).copied()
    }

    pub fn neighbors(&self, node: &NodeName) -> impl Iterator<Item = &NodeName> {
        self.adjacency.get(node).into_iter().flatten()
    }

    fn neighbor_vec(&self, node: &NodeName) -> Vec<NodeName> {
        self.neighbors(node).cloned().collect()
    }

    pub fn has_edge(&self, a: &NodeName, b: &NodeName) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeName, &NodeName)> {
        self.adjacency
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (a, b)))
    }

    /// Signed deviation (left positive) of the outgoing direction `at -> next`
    /// from the travel direction `prev -> at`, in `(-pi, pi]`.
    pub fn deviation_angle(
        &self,
        prev: &NodeName,
        at: &NodeName,
        next: &NodeName,
    ) -> Result<f64, EnvError> {
        for n in [prev, next] {
            if !self.has_edge(n, at) {
                return Err(EnvError::MissingEdge(n.clone(), at.clone()));
            }
        }
        let (p, a, n) = (self.coords[prev], self.coords[at], self.coords[next]);
        let (ix, iy) = (a.x - p.x, a.y - p.y);
        let (ox, oy) = (n.x - a.x, n.y - a.y);
        let cross = ix * oy - iy * ox;
        let dot = ix * ox + iy * oy;
        Ok(normalize_angle(cross.atan2(dot)))
    }

    /// The true action at `at`, quantized from geometry.
    pub fn ground_truth_action(
        &self,
        prev: &NodeName,
        at: &NodeName,
        next: &NodeName,
        theta: AngleThreshold,
    ) -> Result<Action, EnvError> {
        let angle = self.deviation_angle(prev, at, next)?;
        Ok(Action::from_angle(angle, theta).expect("normalized angles are in domain"))
    }

    /// All `(prev, at, next)` with both edges present, including `prev == next`.
    pub fn triples(&self) -> Vec<(NodeName, NodeName, NodeName)> {
        let mut out = Vec::new();
        for (at, ns) in &self.adjacency {
            for p in ns {
                for n in ns {
                    out.push((p.clone(), at.clone(), n.clone()));
                }
            }
        }
        out
    }

    /// Lexicographically first minimal-edge-count path with true actions.
    pub fn ground_truth_path(
        &self,
        start: &NodeName,
        goal: &NodeName,
        theta: AngleThreshold,
    ) -> Option<CanonicalPath> {
        let start = self.coords.get_key_value(start)?.0;
        let goal = self.coords.get_key_value(goal)?.0;
        if start == goal {
            return None;
        }
        shortest_path(
            |n| self.neighbor_vec(n),
            start,
            goal,
            |p, a, n| self.ground_truth_action(p, a, n, theta).ok(),
        )
        .ok()
    }

    pub fn distance(&self, a: &NodeName, b: &NodeName) -> Option<usize> {
        unit_cost_distances(|n| self.neighbor_vec(n), a).get(b).copied()
    }

    /// Judges a proposed route against the geometry.
    pub fn score_route(
        &self,
        start: &NodeName,
        goal: &NodeName,
        route: &CanonicalPath,
        theta: AngleThreshold,
    ) -> RouteScore {
        let fail = |reason: String| RouteScore { reachable: false, shortest: false, reason: Some(reason) };
        if route.validate().is_err() {
            return fail("route is not a valid canonical path".into());
        }
        if route.start() != start || route.goal() != goal {
            return fail(format!("route runs {} -> {}, expected {start} -> {goal}", route.start(), route.goal()));
        }
        if let Some(w) = route.waypoints.iter().find(|w| !self.coords.contains_key(w)) {
            return fail(format!("{w} is not a place in the environment"));
        }
        if let Some(pair) = route.waypoints.windows(2).find(|p| !self.has_edge(&p[0], &p[1])) {
            return fail(format!("no edge between {} and {}", pair[0], pair[1]));
        }
        for (p, a, n, action) in route.triples() {
            let truth = self.ground_truth_action(p, a, n, theta).expect("edges checked");
            if truth != action {
                return fail(format!("action at {a} is {action}, should be {truth}"));
            }
        }
        let edges = route.waypoints.len() - 1;
        let best = self.distance(start, goal).expect("environment is connected");
        RouteScore {
            reachable: true,
            shortest: edges == best,
            reason: (edges != best).then(|| format!("route has {edges} edges, shortest has {best}")),
        }
    }

    pub fn to_json(&self) -> String {
        let file = EnvFile {
            nodes: self.coords.iter().map(|(n, p)| (n.as_str().to_string(), [p.x, p.y])).collect(),
            edges: self
                .edges()
                .map(|(a, b)| [a.as_str().to_string(), b.as_str().to_string()])
                .collect(),
            designated: self.designated.iter().map(|n| n.as_str().to_string()).collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("environments always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let file: EnvFile = serde_json::from_str(text).map_err(|e| EnvError::Json(e.to_string()))?;
        file.try_into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteScore {
    pub reachable: bool,
    pub shortest: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvFile {
    nodes: BTreeMap<String, [f64; 2]>,
    edges: Vec<[String; 2]>,
    designated: Vec<String>,
}

fn name(raw: &str) -> Result<NodeName, EnvError> {
    NodeName::new(raw).map_err(|e| EnvError::Json(e.to_string()))
}

impl TryFrom<EnvFile> for GeoEnvironment {
    type Error = EnvError;

    fn try_from(file: EnvFile) -> Result<Self, EnvError> {
        let nodes = file
            .nodes
            .iter()
            .map(|(n, [x, y])| Ok((name(n)?, Point::new(*x, *y))))
            .collect::<Result<Vec<_>, EnvError>>()?;
        let edges = file
            .edges
            .iter()
            .map(|[a, b]| Ok((name(a)?, name(b)?)))
            .collect::<Result<Vec<_>, EnvError>>()?;
        let designated = file.designated.iter().map(|d| name(d)).collect::<Result<Vec<_>, _>>()?;
        GeoEnvironment::new(nodes, edges, designated)
    }
}

impl Serialize for GeoEnvironment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let value: serde_json::Value =
            serde_json::from_str(&self.to_json()).map_err(serde::ser::Error::custom)?;
        value.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeoEnvironment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = EnvFile::deserialize(d)?;
        file.try_into().map_err(serde::de::Error::custom)
    }
}

/// The five-node example: a T-junction at `n2` and a left bend at `n4`.
pub fn toy_environment() -> GeoEnvironment {
    let n = |s: &str| NodeName::new(s).unwrap();
    GeoEnvironment::new(
        vec![
            (n("n1"), Point::new(0.0, 0.0)),
            (n("n2"), Point::new(0.0, 1.0)),
            (n("n3"), Point::new(1.0, 1.0)),
            (n("n4"), Point::new(0.0, 2.0)),
            (n("n5"), Point::new(-1.0, 2.0)),
        ],
        vec![(n("n1"), n("n2")), (n("n2"), n("n3")), (n("n2"), n("n4")), (n("n4"), n("n5"))],
        ["n1", "n2", "n3", "n4", "n5"].iter().map(|s| n(s)).collect(),
    )
    .expect("toy environment is valid")
}

/// Seeded grid-environment generator.
#[derive(Debug, Clone, Copy)]
pub struct EnvironmentGenerator {
    pub theta: AngleThreshold,
    /// Probability of adding each non-tree grid edge.
    pub loop_probability: f64,
}

impl Default for EnvironmentGenerator {
    fn default() -> Self {
        EnvironmentGenerator { theta: AngleThreshold::default(), loop_probability: 0.25 }
    }
}

const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl EnvironmentGenerator {
    /// Largest per-coordinate jitter that keeps every turn angle within 40%
    /// of the sector half-width of its lattice value.
    fn jitter(&self) -> f64 {
        let theta = self.theta.radians();
        let room = theta.min(FRAC_PI_2 - theta);
        // two edges each deviate by at most atan(2j / (1 - 2j))
        let t = (0.4 * room).tan();
        (t / (2.0 * (1.0 + t))).min(0.1)
    }

    pub fn generate(
        &self,
        seed: u64,
        node_count: usize,
        designated_count: usize,
    ) -> Result<GeoEnvironment, EnvError> {
        if designated_count < 2 || node_count < designated_count {
            return Err(EnvError::Infeasible(format!(
                "need node_count >= designated_count >= 2, got {node_count} and {designated_count}"
            )));
        }
        if !(0.0..=1.0).contains(&self.loop_probability) {
            return Err(EnvError::Infeasible("loop probability must be in [0, 1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells = vec![(0i32, 0i32)];
        let mut index: HashMap<(i32, i32), usize> = HashMap::from([((0, 0), 0)]);
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        while cells.len() < node_count {
            let frontier: Vec<(usize, (i32, i32))> = cells
                .iter()
                .enumerate()
                .flat_map(|(i, &(x, y))| DIRS.iter().map(move |&(dx, dy)| (i, (x + dx, y + dy))))
                .filter(|(_, c)| !index.contains_key(c))
                .collect();
            let (from, cell) = frontier[rng.random_range(0..frontier.len())];
            index.insert(cell, cells.len());
            edges.insert((from, cells.len()));
            cells.push(cell);
        }
        for (i, &(x, y)) in cells.iter().enumerate() {
            for (dx, dy) in [(1, 0), (0, 1)] {
                if let Some(&j) = index.get(&(x + dx, y + dy)) {
                    let key = (i.min(j), i.max(j));
                    if !edges.contains(&key) && rng.random_bool(self.loop_probability) {
                        edges.insert(key);
                    }
                }
            }
        }

        let mut pool: Vec<String> = PLACE_NAMES.iter().map(|s| s.to_string()).collect();
        pool.shuffle(&mut rng);
        let names: Vec<NodeName> = (0..node_count)
            .map(|i| {
                let raw = pool.get(i).cloned().unwrap_or_else(|| format!("Room {}", i + 1));
                NodeName::new(&raw).unwrap()
            })
            .collect();
        let jitter = self.jitter();
        let nodes: Vec<(NodeName, Point)> = cells
            .iter()
            .zip(&names)
            .map(|(&(x, y), n)| {
                let jx = rng.random_range(-jitter..=jitter);
                let jy = rng.random_range(-jitter..=jitter);
                (n.clone(), Point::new(x as f64 + jx, y as f64 + jy))
            })
            .collect();
        let mut order: Vec<usize> = (0..node_count).collect();
        order.shuffle(&mut rng);
        let designated = order[..designated_count].iter().map(|&i| names[i].clone()).collect();
        let env = GeoEnvironment::new(
            nodes,
            edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect(),
            designated,
        )?;

        // every turn must sit inside its sector and agree with the lattice turn
        let lattice: HashMap<NodeName, (i32, i32)> =
            names.iter().cloned().zip(cells.iter().copied()).collect();
        for (p, a, n) in env.triples() {
            let angle = env.deviation_angle(&p, &a, &n)?;
            if p != n && self.theta.boundary_margin(angle) <= BOUNDARY_MARGIN {
                return Err(EnvError::Infeasible(format!("turn at {a} lies on a sector boundary")));
            }
            let expected = lattice_action(lattice[&p], lattice[&a], lattice[&n]);
            if Action::from_angle(angle, self.theta).ok() != Some(expected) {
                return Err(EnvError::Infeasible(format!("jitter moved the turn at {a} out of its sector")));
            }
        }
        Ok(env)
    }
}

fn lattice_action(p: (i32, i32), a: (i32, i32), n: (i32, i32)) -> Action {
    let bearing = |from: (i32, i32), to: (i32, i32)| -> u8 {
        match (to.0 - from.0, to.1 - from.1) {
            (1, 0) => 0,
            (0, 1) => 1,
            (-1, 0) => 2,
            _ => 3,
        }
    };
    Action::from_quarter_turns(bearing(a, n) + 4 - bearing(p, a))
}

/// [`EnvironmentGenerator::generate`] with default settings.
pub fn generate_environment(
    seed: u64,
    node_count: usize,
    designated_count: usize,
) -> Result<GeoEnvironment, EnvError> {
    EnvironmentGenerator::default().generate(seed, node_count, designated_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathItem {
    pub start: NodeName,
    pub goal: NodeName,
    pub path: CanonicalPath,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDataset {
    pub environment_id: String,
    pub seed: u64,
    pub theta: AngleThreshold,
    pub environment: GeoEnvironment,
    pub items: Vec<PathItem>,
}

impl PathDataset {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("datasets always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        serde_json::from_str(text).map_err(|e| EnvError::Json(e.to_string()))
    }
}

/// Stable fingerprint of an environment file.
pub fn environment_id(env: &GeoEnvironment) -> String {
    // FNV-1a, 64 bit
    let hash = env
        .to_json()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    format!("env-{hash:016x}")
}

/// [`sample_dataset_with`] at the default threshold.
pub fn sample_dataset(env: &GeoEnvironment, seed: u64) -> Result<PathDataset, EnvError> {
    sample_dataset_with(env, seed, AngleThreshold::default())
}

/// Picks [`DATASET_SIZE`] start/goal pairs among the designated nodes such
/// that each held-out path can be recovered, shortest and with correct
/// actions, from a map of the other paths.
///
/// Early candidates use distinct unordered pairs with random direction;
/// later ones draw any ordered pairs.
pub fn sample_dataset_with(
    env: &GeoEnvironment,
    seed: u64,
    theta: AngleThreshold,
) -> Result<PathDataset, EnvError> {
    let designated = env.designated();
    let mut unordered = Vec::new();
    for (i, a) in designated.iter().enumerate() {
        for b in &designated[i + 1..] {
            unordered.push((a.clone(), b.clone()));
        }
    }
    if unordered.len() * 2 < DATASET_SIZE {
        return Err(EnvError::Sampling(format!(
            "{} designated nodes give only {} ordered pairs, {DATASET_SIZE} are needed",
            designated.len(),
            unordered.len() * 2
        )));
    }
    let mut truth: HashMap<(NodeName, NodeName), CanonicalPath> = HashMap::new();
    for (a, b) in &unordered {
        let forward = env
            .ground_truth_path(a, b, theta)
            .ok_or_else(|| EnvError::Sampling(format!("no path between {a} and {b}")))?;
        truth.insert((b.clone(), a.clone()), forward.reverse().expect("valid path"));
        truth.insert((a.clone(), b.clone()), forward);
    }
    let ordered: Vec<(NodeName, NodeName)> = unordered
        .iter()
        .flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())])
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried_distinct = unordered.len() < DATASET_SIZE;
    for attempt in 0..SELECTION_ATTEMPTS {
        let pairs: Vec<(NodeName, NodeName)> = if !tried_distinct && attempt < SELECTION_ATTEMPTS / 2 {
            let mut pool = unordered.clone();
            pool.shuffle(&mut rng);
            pool.into_iter()
                .take(DATASET_SIZE)
                .map(|(a, b)| if rng.random_bool(0.5) { (a, b) } else { (b, a) })
                .collect()
        } else {
            tried_distinct = true;
            let mut pool = ordered.clone();
            pool.shuffle(&mut rng);
            pool.truncate(DATASET_SIZE);
            pool
        };
        let paths: Vec<&CanonicalPath> = pairs.iter().map(|k| &truth[k]).collect();
        if held_out_recoverable(env, &paths, theta) {
            let items = pairs
                .iter()
                .zip(paths)
                .map(|((s, g), p)| PathItem {
                    start: s.clone(),
                    goal: g.clone(),
                    path: p.clone(),
                    instruction: generate_instruction(p).expect("valid path"),
                })
                .collect();
            return Ok(PathDataset {
                environment_id: environment_id(env),
                seed,
                theta,
                environment: env.clone(),
                items,
            });
        }
    }
    Err(EnvError::Sampling(format!(
        "no selection of {DATASET_SIZE} pairs out of {SELECTION_ATTEMPTS} candidates lets every held-out path be recovered"
    )))
}

fn held_out_recoverable(env: &GeoEnvironment, paths: &[&CanonicalPath], theta: AngleThreshold) -> bool {
    (0..paths.len()).all(|held| {
        let mut map = TopoMap::new();
        for (i, p) in paths.iter().enumerate() {
            if i != held && map.add_path(p).is_err() {
                return false;
            }
        }
        let (start, goal) = (paths[held].start(), paths[held].goal());
        let Ok(query) = RouteQuery::new(start.clone(), goal.clone()) else {
            return false;
        };
        match find_route(&map, &query) {
            Ok(route) => env.score_route(start, goal, &route, theta).shortest,
            Err(_) => false,
        }
    })
}
