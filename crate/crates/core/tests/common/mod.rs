#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};

use topotext::action::Action;
use topotext::canonical::NodeName;
use topotext::envsim::{generate_environment, sample_dataset, GeoEnvironment, PathDataset};
use topotext::instruction::{BackendError, ExtractorBackend, TurnPoints, TurnSide};

pub const W1: &str = "Depart from n1 to n2. Then, turn right and proceed to n3.";
pub const W2: &str = "Depart from n1 to n2. Then, proceed to n4. Then, turn left and proceed to n5.";
pub const TOY_ANSWER: &str =
    "Depart from n5 to n4. Then, turn right and proceed to n2. Then, turn left and proceed to n3.";

pub fn n(s: &str) -> NodeName {
    NodeName::new(s).unwrap()
}

pub fn names(list: &[&str]) -> Vec<NodeName> {
    list.iter().map(|s| n(s)).collect()
}

/// Quantizes a heading change by comparing degrees against the sector
/// edges directly, independent of the library's angle code.
pub fn oracle_action(env: &GeoEnvironment, prev: &NodeName, at: &NodeName, next: &NodeName, theta: f64) -> Action {
    let p = env.position(prev).unwrap();
    let a = env.position(at).unwrap();
    let q = env.position(next).unwrap();
    let heading_in = (a.y - p.y).atan2(a.x - p.x);
    let heading_out = (q.y - a.y).atan2(q.x - a.x);
    let mut d = (heading_out - heading_in).to_degrees();
    while d > 180.0 {
        d -= 360.0;
    }
    while d <= -180.0 {
        d += 360.0;
    }
    let t = theta.to_degrees();
    if d.abs() <= t {
        Action::Forward
    } else if d.abs() >= 180.0 - t {
        Action::TurnAround
    } else if d > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

/// Hop counts from `source` by plain breadth-first search.
pub fn bfs(neighbors: impl Fn(&NodeName) -> Vec<NodeName>, source: &NodeName) -> BTreeMap<NodeName, usize> {
    let mut dist = BTreeMap::from([(source.clone(), 0)]);
    let mut queue = VecDeque::from([source.clone()]);
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        for y in neighbors(&x) {
            if !dist.contains_key(&y) {
                dist.insert(y.clone(), d + 1);
                queue.push_back(y);
            }
        }
    }
    dist
}

/// The first `count` seeds, starting at 0, whose environment yields a
/// dataset. Node counts cycle through 11..=15.
pub fn seeded_datasets(count: usize) -> Vec<PathDataset> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let nodes = 11 + (seed % 5) as usize;
        if let Ok(env) = generate_environment(seed, nodes, 7) {
            if let Ok(d) = sample_dataset(&env, seed) {
                out.push(d);
            }
        }
        seed += 1;
        assert!(seed < 10_000, "could not find enough datasets");
    }
    out
}

/// Answers from queues and counts every call.
#[derive(Default)]
pub struct Scripted {
    pub left: RefCell<VecDeque<TurnPoints>>,
    pub right: RefCell<VecDeque<TurnPoints>>,
    pub checks: RefCell<VecDeque<TurnSide>>,
    pub extract_calls: RefCell<usize>,
    pub check_calls: RefCell<Vec<NodeName>>,
}

impl Scripted {
    pub fn pair(&self, waypoints_left: &[&str], left: &[&str], waypoints_right: &[&str], right: &[&str]) {
        self.left.borrow_mut().push_back(TurnPoints {
            waypoints: names(waypoints_left),
            turn_points: names(left).into_iter().collect(),
        });
        self.right.borrow_mut().push_back(TurnPoints {
            waypoints: names(waypoints_right),
            turn_points: names(right).into_iter().collect(),
        });
    }
}

impl ExtractorBackend for Scripted {
    fn extract_turn_points(&self, _: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
        *self.extract_calls.borrow_mut() += 1;
        let queue = match side {
            TurnSide::Left => &self.left,
            TurnSide::Right => &self.right,
        };
        queue.borrow_mut().pop_front().ok_or_else(|| BackendError::msg("script exhausted"))
    }

    fn check_turn(&self, _: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError> {
        self.check_calls.borrow_mut().push(waypoint.clone());
        self.checks.borrow_mut().pop_front().ok_or_else(|| BackendError::msg("script exhausted"))
    }
}
