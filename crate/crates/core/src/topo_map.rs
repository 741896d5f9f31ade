//! The explicit map: an undirected place graph plus the actions users have
//! described at each place.
//!
//! Only instructed actions are stored. Everything else is derived at query
//! time from a per-node relation system: a stored action `a` for the triple
//! `(x, at, y)` fixes the bearing of `y` relative to `x` (seen from `at`) at
//! `a + 2` quarter turns. Any two neighbours connected through such relations
//! have a known relative bearing, so the action between them is known too.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::canonical::{CanonicalPath, NodeName, ValidationError};
use crate::relation::OffsetUnionFind;

pub const MAP_FILE_VERSION: u32 = 1;

/// `(prev, at, next)`.
pub type Triple = (NodeName, NodeName, NodeName);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("conflicting action at {node} for {} -> {} -> {}: map implies {stored}, instruction says {incoming}", triple.0, triple.1, triple.2)]
pub struct MapConflict {
    pub node: NodeName,
    pub triple: Triple,
    pub stored: Action,
    pub incoming: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Conflict(#[from] MapConflict),
    #[error("no edge between {0} and {1}")]
    MissingEdge(NodeName, NodeName),
}

#[derive(Debug, Error)]
pub enum MapFileError {
    #[error("malformed map file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported map file version {0}")]
    Version(u32),
    #[error("map file lists node {0} more than once")]
    DuplicateNode(String),
    #[error("map file references unknown node {0}")]
    UnknownNode(String),
    #[error("map file has a self-loop edge at {0}")]
    SelfLoop(String),
    #[error("action for {0} -> {1} -> {2} uses an edge that is not in the map")]
    DanglingAction(String, String, String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopoMap {
    nodes: BTreeSet<NodeName>,
    adjacency: BTreeMap<NodeName, BTreeSet<NodeName>>,
    // at -> (prev, next) -> action
    actions: BTreeMap<NodeName, BTreeMap<(NodeName, NodeName), Action>>,
}

impl TopoMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn stored_action_count(&self) -> usize {
        self.actions.values().map(BTreeMap::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeName> {
        self.nodes.iter()
    }

    /// Looks a node up by name, returning the stored spelling.
    pub fn resolve(&self, name: &NodeName) -> Option<&NodeName> {
        self.nodes.get(name)
    }

    pub fn contains(&self, name: &NodeName) -> bool {
        self.nodes.contains(name)
    }

    pub fn neighbors(&self, node: &NodeName) -> impl Iterator<Item = &NodeName> {
        self.adjacency.get(node).into_iter().flatten()
    }

    pub fn has_edge(&self, a: &NodeName, b: &NodeName) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.contains(b))
    }

    /// Unordered edges, each as `(smaller, larger)` by name key.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeName, &NodeName)> {
        self.adjacency
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (a, b)))
    }

    /// Stored triples in lexicographic `(prev, at, next)` order.
    pub fn stored_actions(&self) -> Vec<(Triple, Action)> {
        let mut out: Vec<(Triple, Action)> = self
            .actions
            .iter()
            .flat_map(|(at, m)| {
                m.iter()
                    .map(move |((p, n), &a)| ((p.clone(), at.clone(), n.clone()), a))
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Adds a path atomically: either every waypoint, edge and action is
    /// recorded or, on a contradiction, nothing is.
    pub fn add_path(&mut self, path: &CanonicalPath) -> Result<(), MapError> {
        path.validate()?;
        let mut next = self.clone();
        for w in &path.waypoints {
            next.insert_node(w);
        }
        for pair in path.waypoints.windows(2) {
            next.insert_edge(&pair[0], &pair[1]);
        }
        for (p, at, n, action) in path.triples() {
            let (p, at, n) = (next.canon(p), next.canon(at), next.canon(n));
            if let Some(derived) = next.infer_action(&p, &at, &n)? {
                if derived != action {
                    return Err(MapConflict {
                        node: at.clone(),
                        triple: (p, at, n),
                        stored: derived,
                        incoming: action,
                    }
                    .into());
                }
            }
            next.actions
                .entry(at)
                .or_default()
                .entry((p, n))
                .or_insert(action);
        }
        *self = next;
        Ok(())
    }

    /// Exact lookup, no inference.
    pub fn stored_action(&self, prev: &NodeName, at: &NodeName, next: &NodeName) -> Option<Action> {
        self.actions
            .get(at)?
            .get(&(prev.clone(), next.clone()))
            .copied()
    }

    /// The action at `at` when arriving from `prev` and leaving to `next`,
    /// derived from stored actions. `Ok(None)` means the map does not hold
    /// enough information.
    pub fn infer_action(
        &self,
        prev: &NodeName,
        at: &NodeName,
        next: &NodeName,
    ) -> Result<Option<Action>, MapError> {
        for n in [prev, next] {
            if !self.has_edge(n, at) {
                return Err(MapError::MissingEdge(n.clone(), at.clone()));
            }
        }
        if prev == next {
            return Ok(Some(Action::TurnAround));
        }
        if let Some(a) = self.stored_action(prev, at, next) {
            return Ok(Some(a));
        }
        let mut rel = match NodeRelations::build(self, at) {
            Ok(rel) => rel,
            // an inconsistent node cannot answer anything reliably
            Err(_) => return Ok(None),
        };
        Ok(rel.action(prev, next))
    }

    /// Checks every node's relation system. Reports one witness per
    /// inconsistent node.
    pub fn check_consistency(&self) -> Result<(), Vec<MapConflict>> {
        let conflicts: Vec<MapConflict> = self
            .actions
            .keys()
            .filter_map(|at| NodeRelations::build(self, at).err())
            .collect();
        if conflicts.is_empty() {
            Ok(())
        } else {
            Err(conflicts)
        }
    }

    /// Every `(prev, at, next)` over map edges whose action can be inferred.
    pub fn inferable_actions(&self) -> BTreeMap<Triple, Action> {
        let mut out = BTreeMap::new();
        for at in &self.nodes {
            let ns: Vec<&NodeName> = self.neighbors(at).collect();
            for p in &ns {
                for n in &ns {
                    if let Ok(Some(a)) = self.infer_action(p, at, n) {
                        out.insert(((*p).clone(), at.clone(), (*n).clone()), a);
                    }
                }
            }
        }
        out
    }

    fn canon(&self, name: &NodeName) -> NodeName {
        self.nodes.get(name).cloned().unwrap_or_else(|| name.clone())
    }

    fn insert_node(&mut self, name: &NodeName) {
        if !self.nodes.contains(name) {
            self.nodes.insert(name.clone());
        }
    }

    fn insert_edge(&mut self, a: &NodeName, b: &NodeName) {
        let (a, b) = (self.canon(a), self.canon(b));
        self.adjacency.entry(a.clone()).or_default().insert(b.clone());
        self.adjacency.entry(b).or_default().insert(a);
    }

    /// Inserts a stored action without any consistency check. Only for
    /// loading files and building fixtures; call
    /// [`TopoMap::check_consistency`] afterwards.
    pub fn insert_unchecked(
        &mut self,
        prev: &NodeName,
        at: &NodeName,
        next: &NodeName,
        action: Action,
    ) -> Result<(), MapError> {
        for n in [prev, next] {
            if !self.has_edge(n, at) {
                return Err(MapError::MissingEdge(n.clone(), at.clone()));
            }
        }
        let (p, at, n) = (self.canon(prev), self.canon(at), self.canon(next));
        self.actions.entry(at).or_default().insert((p, n), action);
        Ok(())
    }

    /// Serializes to the versioned map file format with lexicographically
    /// ordered nodes, edges and actions. Output is byte-stable.
    pub fn to_json(&self) -> String {
        let file = MapFile {
            version: MAP_FILE_VERSION,
            nodes: self.nodes.iter().map(|n| n.as_str().to_string()).collect(),
            edges: self
                .edges()
                .map(|(a, b)| [a.as_str().to_string(), b.as_str().to_string()])
                .collect(),
            actions: self
                .stored_actions()
                .into_iter()
                .map(|((prev, at, next), action)| ActionEntry {
                    prev: prev.as_str().to_string(),
                    at: at.as_str().to_string(),
                    next: next.as_str().to_string(),
                    action,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("map files always serialize");
        s.push('\n');
        s
    }

    /// Parses a map file. Structure is validated; action consistency is not
    /// (see [`TopoMap::check_consistency`]).
    pub fn from_json(text: &str) -> Result<TopoMap, MapFileError> {
        let file: MapFile = serde_json::from_str(text)?;
        if file.version != MAP_FILE_VERSION {
            return Err(MapFileError::Version(file.version));
        }
        let mut map = TopoMap::new();
        for raw in &file.nodes {
            let name = parse_name(raw)?;
            if map.nodes.contains(&name) {
                return Err(MapFileError::DuplicateNode(raw.clone()));
            }
            map.nodes.insert(name);
        }
        let known = |map: &TopoMap, raw: &str| -> Result<NodeName, MapFileError> {
            let name = parse_name(raw)?;
            map.nodes
                .get(&name)
                .cloned()
                .ok_or_else(|| MapFileError::UnknownNode(raw.to_string()))
        };
        for [a, b] in &file.edges {
            let (a, b) = (known(&map, a)?, known(&map, b)?);
            if a == b {
                return Err(MapFileError::SelfLoop(a.to_string()));
            }
            map.insert_edge(&a, &b);
        }
        for e in &file.actions {
            let (p, at, n) = (known(&map, &e.prev)?, known(&map, &e.at)?, known(&map, &e.next)?);
            map.insert_unchecked(&p, &at, &n, e.action).map_err(|_| {
                MapFileError::DanglingAction(e.prev.clone(), e.at.clone(), e.next.clone())
            })?;
        }
        Ok(map)
    }
}

fn parse_name(raw: &str) -> Result<NodeName, MapFileError> {
    NodeName::new(raw).map_err(|_| MapFileError::UnknownNode(raw.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    version: u32,
    nodes: Vec<String>,
    edges: Vec<[String; 2]>,
    actions: Vec<ActionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionEntry {
    prev: String,
    at: String,
    next: String,
    action: Action,
}

/// Relative bearings among one node's neighbours.
struct NodeRelations {
    index: BTreeMap<NodeName, usize>,
    uf: OffsetUnionFind,
}

impl NodeRelations {
    fn build(map: &TopoMap, at: &NodeName) -> Result<NodeRelations, MapConflict> {
        let index: BTreeMap<NodeName, usize> = map
            .neighbors(at)
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut uf = OffsetUnionFind::new(index.len());
        if let Some(stored) = map.actions.get(at) {
            for ((p, n), &action) in stored {
                // bearing(next) - bearing(prev) = action + 2
                let d = (action.quarter_turns() + 2) % 4;
                if let Err(existing) = uf.union(index[p], index[n], d) {
                    return Err(MapConflict {
                        node: at.clone(),
                        triple: (p.clone(), at.clone(), n.clone()),
                        stored: action,
                        incoming: Action::from_quarter_turns(existing + 2),
                    });
                }
            }
        }
        Ok(NodeRelations { index, uf })
    }

    fn action(&mut self, prev: &NodeName, next: &NodeName) -> Option<Action> {
        let (p, n) = (*self.index.get(prev)?, *self.index.get(next)?);
        self.uf
            .relation(p, n)
            .map(|d| Action::from_quarter_turns(d + 2))
    }
}
