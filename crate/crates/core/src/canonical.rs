//! Canonical route representation: ordered waypoints plus the action taken
//! at each interior waypoint.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("place name is empty")]
    Empty,
    #[error("place name {0:?} contains a line break")]
    LineBreak(String),
}

/// A place label. Keeps the text as written; compares by a case-folded,
/// whitespace-collapsed key.
#[derive(Clone)]
pub struct NodeName {
    text: String,
    key: String,
}

impl NodeName {
    pub fn new(raw: &str) -> Result<NodeName, NameError> {
        let text = raw.trim();
        if text.is_empty() {
            return Err(NameError::Empty);
        }
        if text.contains(['\n', '\r']) {
            return Err(NameError::LineBreak(text.to_string()));
        }
        Ok(NodeName {
            key: name_key(text),
            text: text.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// The comparison key: lowercase, single-spaced.
    pub fn key(&self) -> &str {
        &self.key
    }
}

pub(crate) fn name_key(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl PartialEq for NodeName {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for NodeName {}

impl Hash for NodeName {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl PartialOrd for NodeName {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeName {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl fmt::Debug for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.text, f)
    }
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for NodeName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for NodeName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        NodeName::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// One broken invariant of a [`CanonicalPath`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("path has {0} waypoint(s), at least 2 are required")]
    TooFewWaypoints(usize),
    #[error("waypoint {name} repeats consecutively at positions {index} and {}", index + 1)]
    ConsecutiveRepeat { index: usize, name: String },
    #[error("expected {expected} action(s) for the interior waypoints, found {found}")]
    ActionCountMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid canonical path: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError(pub Vec<Violation>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error(transparent)]
    Name(#[from] NameError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Waypoints `w_1..w_K` and the actions at `w_2..w_{K-1}`; `actions[i]` is
/// the action at `waypoints[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalPath {
    pub waypoints: Vec<NodeName>,
    pub actions: Vec<Action>,
}

impl CanonicalPath {
    /// Builds a path and validates it.
    pub fn new(waypoints: Vec<NodeName>, actions: Vec<Action>) -> Result<Self, ValidationError> {
        let path = CanonicalPath { waypoints, actions };
        path.validate()?;
        Ok(path)
    }

    /// Convenience constructor from string names.
    pub fn from_names<S: AsRef<str>>(names: &[S], actions: &[Action]) -> Result<Self, PathError> {
        let waypoints = names
            .iter()
            .map(|n| NodeName::new(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CanonicalPath::new(waypoints, actions.to_vec())?)
    }

    /// Returns every violated invariant, or `Ok` if there are none.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut violations = Vec::new();
        let k = self.waypoints.len();
        if k < 2 {
            violations.push(Violation::TooFewWaypoints(k));
        }
        for (index, pair) in self.waypoints.windows(2).enumerate() {
            if pair[0] == pair[1] {
                violations.push(Violation::ConsecutiveRepeat {
                    index,
                    name: pair[0].to_string(),
                });
            }
        }
        let expected = k.saturating_sub(2);
        if self.actions.len() != expected {
            violations.push(Violation::ActionCountMismatch {
                expected,
                found: self.actions.len(),
            });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationError(violations))
        }
    }

    /// The same route walked backwards. Each interior action is inverted.
    pub fn reverse(&self) -> Result<CanonicalPath, ValidationError> {
        self.validate()?;
        Ok(CanonicalPath {
            waypoints: self.waypoints.iter().rev().cloned().collect(),
            actions: self.actions.iter().rev().map(|a| a.inverse()).collect(),
        })
    }

    pub fn start(&self) -> &NodeName {
        &self.waypoints[0]
    }

    pub fn goal(&self) -> &NodeName {
        &self.waypoints[self.waypoints.len() - 1]
    }

    /// `(prev, at, next, action)` for each interior waypoint.
    pub fn triples(&self) -> impl Iterator<Item = (&NodeName, &NodeName, &NodeName, Action)> {
        self.waypoints
            .windows(3)
            .zip(&self.actions)
            .map(|(w, &a)| (&w[0], &w[1], &w[2], a))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("canonical paths always serialize")
    }
}

impl fmt::Display for CanonicalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.waypoints.iter().map(NodeName::as_str).collect();
        let actions: Vec<&str> = self.actions.iter().map(|a| a.token()).collect();
        write!(f, "[{}] / [{}]", names.join(", "), actions.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    fn path(names: &[&str], actions: &[Action]) -> CanonicalPath {
        CanonicalPath {
            waypoints: names.iter().map(|n| NodeName::new(n).unwrap()).collect(),
            actions: actions.to_vec(),
        }
    }

    #[test]
    fn names_compare_case_insensitively() {
        let a = NodeName::new("  Living   Room ").unwrap();
        let b = NodeName::new("living room").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_str(), "Living   Room");
        assert_eq!(a.key(), "living room");
        assert_eq!(NodeName::new("   "), Err(NameError::Empty));
        assert!(NodeName::new("a\nb").is_err());
    }

    #[test]
    fn validate_accepts_well_formed() {
        assert_eq!(path(&["n1", "n2", "n3"], &[TurnRight]).validate(), Ok(()));
    }

    #[test]
    fn validate_reports_consecutive_repeat() {
        let err = path(&["n1", "n1"], &[]).validate().unwrap_err();
        assert!(matches!(err.0[..], [Violation::ConsecutiveRepeat { index: 0, .. }]));
    }

    #[test]
    fn validate_reports_action_count() {
        let err = path(&["n1", "n2", "n3"], &[]).validate().unwrap_err();
        assert_eq!(
            err.0,
            vec![Violation::ActionCountMismatch {
                expected: 1,
                found: 0
            }]
        );
    }

    #[test]
    fn validate_reports_all_violations() {
        let err = path(&["a"], &[Forward]).validate().unwrap_err();
        assert_eq!(err.0.len(), 2);
    }

    #[test]
    fn reverse_inverts_actions() {
        let p = path(&["n1", "n2", "n3"], &[TurnRight]);
        assert_eq!(p.reverse().unwrap(), path(&["n3", "n2", "n1"], &[TurnLeft]));
        let two = path(&["a", "b"], &[]);
        assert_eq!(two.reverse().unwrap(), path(&["b", "a"], &[]));
        assert!(path(&["a", "a"], &[]).reverse().is_err());
    }

    #[test]
    fn json_shape() {
        let p = path(&["n1", "n2", "n3"], &[TurnRight]);
        assert_eq!(p.to_json(), r#"{"waypoints":["n1","n2","n3"],"actions":["R"]}"#);
        let back: CanonicalPath = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }
}
