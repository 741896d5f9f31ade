//! Start/goal queries over a [`TopoMap`].
//!
//! Routes are always minimal in edge count. Among the minimal routes, the
//! one whose waypoint sequence is lexicographically first *and* whose every
//! interior action can be inferred is returned.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use thiserror::Error;

use crate::action::Action;
use crate::canonical::{CanonicalPath, NodeName};
use crate::topo_map::{TopoMap, Triple};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteQuery {
    pub start: NodeName,
    pub goal: NodeName,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("start and goal are both {0}")]
pub struct SameEndpoints(pub NodeName);

impl RouteQuery {
    pub fn new(start: NodeName, goal: NodeName) -> Result<Self, SameEndpoints> {
        if start == goal {
            return Err(SameEndpoints(start));
        }
        Ok(RouteQuery { start, goal })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteFailure {
    #[error("unknown node {0}")]
    UnknownNode(NodeName),
    #[error("no path from {start} to {goal}")]
    NoPath { start: NodeName, goal: NodeName },
    #[error("not enough information for the action at {} between {} and {}", triple.1, triple.0, triple.2)]
    InsufficientInformation { triple: Triple },
}

impl RouteFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            RouteFailure::UnknownNode(_) => "unknown-node",
            RouteFailure::NoPath { .. } => "no-path",
            RouteFailure::InsufficientInformation { .. } => "insufficient-information",
        }
    }
}

pub fn find_route(map: &TopoMap, query: &RouteQuery) -> Result<CanonicalPath, RouteFailure> {
    let start = map
        .resolve(&query.start)
        .ok_or_else(|| RouteFailure::UnknownNode(query.start.clone()))?;
    let goal = map
        .resolve(&query.goal)
        .ok_or_else(|| RouteFailure::UnknownNode(query.goal.clone()))?;
    let neighbors = |n: &NodeName| map.neighbors(n).cloned().collect::<Vec<_>>();
    let infer = |p: &NodeName, at: &NodeName, n: &NodeName| map.infer_action(p, at, n).ok().flatten();
    match shortest_path(neighbors, start, goal, infer) {
        Ok(path) => Ok(path),
        Err(SearchFailure::NoPath) => Err(RouteFailure::NoPath {
            start: start.clone(),
            goal: goal.clone(),
        }),
        Err(SearchFailure::Blocked(triple)) => {
            Err(RouteFailure::InsufficientInformation { triple })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchFailure {
    NoPath,
    /// Every minimal route has an unknown action; carries the first one on
    /// the lexicographically first route.
    Blocked(Triple),
}

/// Edge-count distances from `source` by uniform-cost search with unit
/// weights.
pub fn unit_cost_distances<N>(neighbors: N, source: &NodeName) -> BTreeMap<NodeName, usize>
where
    N: Fn(&NodeName) -> Vec<NodeName>,
{
    let mut dist = BTreeMap::new();
    let mut frontier = BinaryHeap::new();
    dist.insert(source.clone(), 0usize);
    frontier.push(Reverse((0usize, source.clone())));
    while let Some(Reverse((d, node))) = frontier.pop() {
        if dist.get(&node).is_some_and(|&best| d > best) {
            continue;
        }
        for next in neighbors(&node) {
            let candidate = d + 1;
            if dist.get(&next).is_none_or(|&best| candidate < best) {
                dist.insert(next.clone(), candidate);
                frontier.push(Reverse((candidate, next)));
            }
        }
    }
    dist
}

/// Lexicographically first minimal-edge-count path from `start` to `goal`
/// whose interior actions are all provided by `action`.
///
/// `neighbors` must describe an undirected graph.
pub fn shortest_path<N, A>(
    neighbors: N,
    start: &NodeName,
    goal: &NodeName,
    action: A,
) -> Result<CanonicalPath, SearchFailure>
where
    N: Fn(&NodeName) -> Vec<NodeName>,
    A: Fn(&NodeName, &NodeName, &NodeName) -> Option<Action>,
{
    let from_start = unit_cost_distances(&neighbors, start);
    if !from_start.contains_key(goal) {
        return Err(SearchFailure::NoPath);
    }
    let to_goal = unit_cost_distances(&neighbors, goal);
    let mut search = Search {
        neighbors: &neighbors,
        action: &action,
        from_start: &from_start,
        to_goal: &to_goal,
        goal,
        dead: HashSet::new(),
        first_block: None,
        waypoints: vec![start.clone()],
        actions: Vec::new(),
    };
    if search.extend(None, start) {
        Ok(CanonicalPath {
            waypoints: search.waypoints,
            actions: search.actions,
        })
    } else {
        Err(SearchFailure::Blocked(
            search.first_block.expect("a reachable goal with no route must have been blocked"),
        ))
    }
}

struct Search<'a, N, A> {
    neighbors: &'a N,
    action: &'a A,
    from_start: &'a BTreeMap<NodeName, usize>,
    to_goal: &'a BTreeMap<NodeName, usize>,
    goal: &'a NodeName,
    // (prev, cur) states known not to complete
    dead: HashSet<(Option<NodeName>, NodeName)>,
    first_block: Option<Triple>,
    waypoints: Vec<NodeName>,
    actions: Vec<Action>,
}

impl<N, A> Search<'_, N, A>
where
    N: Fn(&NodeName) -> Vec<NodeName>,
    A: Fn(&NodeName, &NodeName, &NodeName) -> Option<Action>,
{
    fn extend(&mut self, prev: Option<&NodeName>, cur: &NodeName) -> bool {
        if cur == self.goal {
            return true;
        }
        let state = (prev.cloned(), cur.clone());
        if self.dead.contains(&state) {
            return false;
        }
        let (ds, dg) = (self.from_start[cur], self.to_goal[cur]);
        let mut next_hops: Vec<NodeName> = (self.neighbors)(cur)
            .into_iter()
            .filter(|u| {
                self.from_start.get(u) == Some(&(ds + 1))
                    && dg > 0
                    && self.to_goal.get(u) == Some(&(dg - 1))
            })
            .collect();
        next_hops.sort();
        for u in next_hops {
            if let Some(p) = prev {
                match (self.action)(p, cur, &u) {
                    Some(a) => self.actions.push(a),
                    None => {
                        if self.first_block.is_none() {
                            self.first_block = Some((p.clone(), cur.clone(), u.clone()));
                        }
                        continue;
                    }
                }
            }
            self.waypoints.push(u.clone());
            if self.extend(Some(cur), &u) {
                return true;
            }
            self.waypoints.pop();
            if prev.is_some() {
                self.actions.pop();
            }
        }
        self.dead.insert(state);
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    fn n(s: &str) -> NodeName {
        NodeName::new(s).unwrap()
    }

    fn path(names: &[&str], actions: &[Action]) -> CanonicalPath {
        CanonicalPath::from_names(names, actions).unwrap()
    }

    fn toy_map() -> TopoMap {
        let mut map = TopoMap::new();
        map.add_path(&path(&["n1", "n2", "n3"], &[TurnRight])).unwrap();
        map.add_path(&path(&["n1", "n2", "n4", "n5"], &[Forward, TurnLeft]))
            .unwrap();
        map
    }

    fn query(a: &str, b: &str) -> RouteQuery {
        RouteQuery::new(n(a), n(b)).unwrap()
    }

    #[test]
    fn worked_example_route() {
        let route = find_route(&toy_map(), &query("n5", "n3")).unwrap();
        assert_eq!(route, path(&["n5", "n4", "n2", "n3"], &[TurnRight, TurnLeft]));
        let route = find_route(&toy_map(), &query("n1", "n3")).unwrap();
        assert_eq!(route, path(&["n1", "n2", "n3"], &[TurnRight]));
    }

    #[test]
    fn unknown_node() {
        assert_eq!(
            find_route(&toy_map(), &query("n3", "n6")),
            Err(RouteFailure::UnknownNode(n("n6")))
        );
    }

    #[test]
    fn disconnected_components() {
        let mut map = toy_map();
        map.add_path(&path(&["x", "y"], &[])).unwrap();
        let err = find_route(&map, &query("n1", "y")).unwrap_err();
        assert_eq!(err.kind(), "no-path");
    }

    #[test]
    fn same_endpoints_rejected() {
        assert!(RouteQuery::new(n("a"), n("A")).is_err());
    }

    #[test]
    fn names_resolve_case_insensitively() {
        let route = find_route(&toy_map(), &query("N5", "N3")).unwrap();
        assert_eq!(route.waypoints[0].as_str(), "n5");
    }

    #[test]
    fn insufficient_information_names_first_blocked_triple() {
        let mut map = TopoMap::new();
        map.add_path(&path(&["a", "x", "b"], &[TurnLeft])).unwrap();
        map.add_path(&path(&["c", "x", "d"], &[Forward])).unwrap();
        let err = find_route(&map, &query("a", "c")).unwrap_err();
        assert_eq!(
            err,
            RouteFailure::InsufficientInformation {
                triple: (n("a"), n("x"), n("c"))
            }
        );
    }

    #[test]
    fn falls_back_to_an_inferable_sibling() {
        // Square s-a-g / s-b-g: both routes have length 2. Only the route
        // through b has a known action.
        let mut map = TopoMap::new();
        map.add_path(&path(&["s", "a"], &[])).unwrap();
        map.add_path(&path(&["a", "g"], &[])).unwrap();
        map.add_path(&path(&["s", "b", "g"], &[TurnLeft])).unwrap();
        let route = find_route(&map, &query("s", "g")).unwrap();
        assert_eq!(route, path(&["s", "b", "g"], &[TurnLeft]));
    }

    #[test]
    fn prefers_lexicographically_first_route() {
        let mut map = TopoMap::new();
        map.add_path(&path(&["s", "b", "g"], &[TurnLeft])).unwrap();
        map.add_path(&path(&["s", "a", "g"], &[TurnRight])).unwrap();
        let route = find_route(&map, &query("s", "g")).unwrap();
        assert_eq!(route, path(&["s", "a", "g"], &[TurnRight]));
    }

    #[test]
    fn distances() {
        let map = toy_map();
        let d = unit_cost_distances(|x| map.neighbors(x).cloned().collect(), &n("n5"));
        assert_eq!(d[&n("n5")], 0);
        assert_eq!(d[&n("n3")], 3);
        assert_eq!(d[&n("n1")], 3);
    }
}
