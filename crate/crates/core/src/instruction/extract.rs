//! Two-extractor translation of free text into a canonical path.
//!
//! One extractor lists the waypoints and the left-turn points, the other the
//! waypoints and the right-turn points. Both are rerun until their waypoint
//! sequences agree or the retry budget is spent. Waypoints marked by both
//! extractors are resolved with a separate turn check.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::action::Action;
use crate::canonical::{CanonicalPath, NodeName, ValidationError};

use super::grammar::{parse_instruction, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TurnSide {
    Left,
    Right,
}

impl TurnSide {
    pub fn action(self) -> Action {
        match self {
            TurnSide::Left => Action::TurnLeft,
            TurnSide::Right => Action::TurnRight,
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            TurnSide::Left => "left",
            TurnSide::Right => "right",
        }
    }
}

impl fmt::Display for TurnSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// One extractor's answer: the waypoint sequence and the points where it saw
/// a turn to its side.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TurnPoints {
    pub waypoints: Vec<NodeName>,
    pub turn_points: BTreeSet<NodeName>,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct BackendError {
    message: String,
    #[source]
    source: Option<Box<dyn std::error::Error + Send + Sync>>,
}

impl BackendError {
    pub fn msg(message: impl Into<String>) -> Self {
        BackendError { message: message.into(), source: None }
    }

    pub fn wrap<E: std::error::Error + Send + Sync + 'static>(err: E) -> Self {
        BackendError { message: err.to_string(), source: Some(Box::new(err)) }
    }

    /// The wrapped error, if any, for downcasting.
    pub fn inner(&self) -> Option<&(dyn std::error::Error + Send + Sync + 'static)> {
        self.source.as_deref()
    }
}

/// The three calls the extraction loop needs.
pub trait ExtractorBackend {
    fn extract_turn_points(&self, instruction: &str, side: TurnSide)
        -> Result<TurnPoints, BackendError>;

    fn check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError>;
}

impl<B: ExtractorBackend + ?Sized> ExtractorBackend for &B {
    fn extract_turn_points(&self, instruction: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
        (**self).extract_turn_points(instruction, side)
    }

    fn check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError> {
        (**self).check_turn(instruction, waypoint)
    }
}

impl<B: ExtractorBackend + ?Sized> ExtractorBackend for std::sync::Arc<B> {
    fn extract_turn_points(&self, instruction: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
        (**self).extract_turn_points(instruction, side)
    }

    fn check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError> {
        (**self).check_turn(instruction, waypoint)
    }
}

/// Maximum number of paired extractor runs. At least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryBudget(u32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("retry budget must be at least 1")]
pub struct ZeroBudget;

impl RetryBudget {
    pub fn new(max_attempts: u32) -> Result<Self, ZeroBudget> {
        if max_attempts == 0 {
            Err(ZeroBudget)
        } else {
            Ok(RetryBudget(max_attempts))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl Default for RetryBudget {
    fn default() -> Self {
        RetryBudget(3)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractionRecord {
    pub waypoints_left: Vec<NodeName>,
    pub waypoints_right: Vec<NodeName>,
    pub left_turns: BTreeSet<NodeName>,
    pub right_turns: BTreeSet<NodeName>,
    pub attempts: u32,
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("extractors disagreed on the waypoints in all {} attempt(s)", record.attempts)]
    NoAgreement { record: ExtractionRecord },
    #[error("backend failed on attempt {attempt}: {source}")]
    Backend {
        attempt: u32,
        #[source]
        source: BackendError,
    },
    #[error("extracted path is invalid: {0}")]
    Invalid(#[from] ValidationError),
}

/// Runs the extraction loop against `backend`.
pub fn extract_canonical<B: ExtractorBackend + ?Sized>(
    instruction: &str,
    backend: &B,
    budget: RetryBudget,
) -> Result<(CanonicalPath, ExtractionRecord), ExtractionError> {
    let mut record = ExtractionRecord::default();
    loop {
        record.attempts += 1;
        let attempt = record.attempts;
        let wrap = |source| ExtractionError::Backend { attempt, source };
        let left = backend
            .extract_turn_points(instruction, TurnSide::Left)
            .map_err(wrap)?;
        let right = backend
            .extract_turn_points(instruction, TurnSide::Right)
            .map_err(wrap)?;
        record.waypoints_left = left.waypoints;
        record.left_turns = left.turn_points;
        record.waypoints_right = right.waypoints;
        record.right_turns = right.turn_points;
        if record.waypoints_left == record.waypoints_right {
            break;
        }
        if record.attempts >= budget.get() {
            return Err(ExtractionError::NoAgreement { record });
        }
    }

    let waypoints = record.waypoints_right.clone();
    let interior = waypoints.len().saturating_sub(2);
    let mut actions = Vec::with_capacity(interior);
    for w in waypoints.iter().skip(1).take(interior) {
        let action = match (record.left_turns.contains(w), record.right_turns.contains(w)) {
            (true, true) => backend
                .check_turn(instruction, w)
                .map_err(|source| ExtractionError::Backend { attempt: record.attempts, source })?
                .action(),
            (true, false) => Action::TurnLeft,
            (false, true) => Action::TurnRight,
            (false, false) => Action::Forward,
        };
        actions.push(action);
    }
    let path = CanonicalPath::new(waypoints, actions)?;
    Ok((path, record))
}

/// Answers the three calls from the grammar parser. Exact on every
/// instruction the grammar accepts whose turns are left or right.
#[derive(Debug, Clone, Copy, Default)]
pub struct GrammarBackend;

impl ExtractorBackend for GrammarBackend {
    fn extract_turn_points(&self, instruction: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
        let path = parse_instruction(instruction).map_err(BackendError::wrap)?;
        let turn_points = path
            .triples()
            .filter(|&(_, _, _, a)| a == side.action() || a == Action::TurnAround)
            .map(|(_, at, _, _)| at.clone())
            .collect();
        Ok(TurnPoints { waypoints: path.waypoints, turn_points })
    }

    fn check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError> {
        let path = parse_instruction(instruction).map_err(BackendError::wrap)?;
        let action = path
            .triples()
            .find(|(_, at, _, _)| *at == waypoint)
            .map(|(_, _, _, a)| a);
        match action {
            Some(Action::TurnLeft) => Ok(TurnSide::Left),
            Some(Action::TurnRight) => Ok(TurnSide::Right),
            Some(other) => Err(BackendError::msg(format!(
                "action at {waypoint} is {other}, neither left nor right"
            ))),
            None => Err(BackendError::msg(format!("{waypoint} is not an interior waypoint"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

/// Anything that turns instruction text into a canonical path.
pub trait PathReader {
    fn read(&self, instruction: &str) -> Result<CanonicalPath, ReadError>;

    /// Short label for reports.
    fn label(&self) -> String;
}

/// Reads with the grammar parser directly.
#[derive(Debug, Clone, Copy, Default)]
pub struct GrammarReader;

impl PathReader for GrammarReader {
    fn read(&self, instruction: &str) -> Result<CanonicalPath, ReadError> {
        Ok(parse_instruction(instruction)?)
    }

    fn label(&self) -> String {
        "grammar".to_string()
    }
}

/// Reads through [`extract_canonical`] with some backend.
pub struct ExtractionReader<B> {
    pub backend: B,
    pub budget: RetryBudget,
    pub label: String,
}

impl<B: ExtractorBackend> PathReader for ExtractionReader<B> {
    fn read(&self, instruction: &str) -> Result<CanonicalPath, ReadError> {
        Ok(extract_canonical(instruction, &self.backend, self.budget)?.0)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::collections::VecDeque;
    use Action::*;

    fn names(list: &[&str]) -> Vec<NodeName> {
        list.iter().map(|n| NodeName::new(n).unwrap()).collect()
    }

    fn set(list: &[&str]) -> BTreeSet<NodeName> {
        names(list).into_iter().collect()
    }

    /// Replays scripted answers in order and counts calls.
    #[derive(Default)]
    struct Scripted {
        left: RefCell<VecDeque<TurnPoints>>,
        right: RefCell<VecDeque<TurnPoints>>,
        checks: RefCell<VecDeque<Result<TurnSide, String>>>,
        calls: RefCell<usize>,
    }

    impl Scripted {
        fn push_pair(&self, wl: &[&str], nl: &[&str], wr: &[&str], nr: &[&str]) {
            self.left.borrow_mut().push_back(TurnPoints { waypoints: names(wl), turn_points: set(nl) });
            self.right.borrow_mut().push_back(TurnPoints { waypoints: names(wr), turn_points: set(nr) });
        }
    }

    impl ExtractorBackend for Scripted {
        fn extract_turn_points(&self, _: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
            *self.calls.borrow_mut() += 1;
            let queue = match side {
                TurnSide::Left => &self.left,
                TurnSide::Right => &self.right,
            };
            queue.borrow_mut().pop_front().ok_or_else(|| BackendError::msg("script exhausted"))
        }

        fn check_turn(&self, _: &str, _: &NodeName) -> Result<TurnSide, BackendError> {
            self.checks
                .borrow_mut()
                .pop_front()
                .expect("unexpected check")
                .map_err(BackendError::msg)
        }
    }

    #[test]
    fn agreement_on_first_attempt() {
        let b = Scripted::default();
        b.push_pair(&["a", "n2", "b"], &["n2"], &["a", "n2", "b"], &[]);
        let (path, record) = extract_canonical("", &b, RetryBudget::default()).unwrap();
        assert_eq!(path, CanonicalPath::from_names(&["a", "n2", "b"], &[TurnLeft]).unwrap());
        assert_eq!(record.attempts, 1);
        assert_eq!(*b.calls.borrow(), 2);
    }

    #[test]
    fn agreement_after_two_disagreements() {
        let b = Scripted::default();
        b.push_pair(&["a", "b"], &[], &["a", "x", "b"], &[]);
        b.push_pair(&["a", "y", "b"], &[], &["a", "x", "b"], &[]);
        b.push_pair(&["a", "x", "b"], &[], &["A", "X", "B"], &["x"]);
        let (path, record) = extract_canonical("", &b, RetryBudget::new(3).unwrap()).unwrap();
        assert_eq!(record.attempts, 3);
        // the right extractor's spelling wins
        assert_eq!(path.waypoints[1].as_str(), "X");
        assert_eq!(path.actions, [TurnRight]);
    }

    #[test]
    fn budget_exhausted() {
        let b = Scripted::default();
        for _ in 0..5 {
            b.push_pair(&["a", "b"], &[], &["a", "c"], &[]);
        }
        match extract_canonical("", &b, RetryBudget::new(3).unwrap()) {
            Err(ExtractionError::NoAgreement { record }) => assert_eq!(record.attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(*b.calls.borrow(), 6);
    }

    #[test]
    fn dual_marked_point_is_checked() {
        let b = Scripted::default();
        b.push_pair(&["a", "m", "f", "b"], &["m"], &["a", "m", "f", "b"], &["m"]);
        b.checks.borrow_mut().push_back(Ok(TurnSide::Right));
        let (path, _) = extract_canonical("", &b, RetryBudget::default()).unwrap();
        assert_eq!(path.actions, [TurnRight, Forward]);
    }

    #[test]
    fn checker_failure_is_a_backend_error() {
        let b = Scripted::default();
        b.push_pair(&["a", "m", "b"], &["m"], &["a", "m", "b"], &["m"]);
        b.checks.borrow_mut().push_back(Err("straight".into()));
        let err = extract_canonical("", &b, RetryBudget::default()).unwrap_err();
        assert!(matches!(err, ExtractionError::Backend { attempt: 1, .. }));
    }

    #[test]
    fn backend_error_propagates_with_attempt() {
        let b = Scripted::default();
        b.push_pair(&["a", "b"], &[], &["a", "c"], &[]);
        let err = extract_canonical("", &b, RetryBudget::new(5).unwrap()).unwrap_err();
        assert!(matches!(err, ExtractionError::Backend { attempt: 2, .. }));
    }

    #[test]
    fn grammar_backend_matches_parser() {
        let text = "Depart from n5 to n4. Then, turn right and proceed to n2. Then, turn left and proceed to n3.";
        let (path, record) = extract_canonical(text, &GrammarBackend, RetryBudget::default()).unwrap();
        assert_eq!(path, parse_instruction(text).unwrap());
        assert_eq!(record.left_turns, set(&["n2"]));
        assert_eq!(record.right_turns, set(&["n4"]));
    }

    #[test]
    fn zero_budget_rejected() {
        assert_eq!(RetryBudget::new(0), Err(ZeroBudget));
    }
}
