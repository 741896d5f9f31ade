//! The two-extractor loop with a backend that makes mistakes: waypoint lists
//! that disagree are retried, and points both extractors claim go to the
//! turn checker.
//!
//! Run with `cargo run --example extraction_loop`.

use std::cell::Cell;

use topotext::canonical::NodeName;
use topotext::instruction::{
    extract_canonical, BackendError, ExtractionError, ExtractorBackend, GrammarBackend, RetryBudget,
    TurnPoints, TurnSide,
};

/// Wraps the exact backend, drops a waypoint from the first left-hand
/// answer, and claims every right turn is also a left turn.
struct Sloppy {
    inner: GrammarBackend,
    left_calls: Cell<u32>,
}

impl ExtractorBackend for Sloppy {
    fn extract_turn_points(&self, instruction: &str, side: TurnSide) -> Result<TurnPoints, BackendError> {
        let mut tp = self.inner.extract_turn_points(instruction, side)?;
        if side == TurnSide::Left {
            self.left_calls.set(self.left_calls.get() + 1);
            if self.left_calls.get() == 1 && tp.waypoints.len() > 2 {
                tp.waypoints.remove(1);
            }
            let right = self.inner.extract_turn_points(instruction, TurnSide::Right)?;
            tp.turn_points.extend(right.turn_points);
        }
        Ok(tp)
    }

    fn check_turn(&self, instruction: &str, waypoint: &NodeName) -> Result<TurnSide, BackendError> {
        println!("  checker asked about {waypoint}");
        self.inner.check_turn(instruction, waypoint)
    }
}

fn main() {
    let text = "Depart from Kitchen to Hallway. Then, turn right and proceed to Office. Then, turn left and proceed to Study.";
    let budget = RetryBudget::new(3).unwrap();

    let (path, record) = extract_canonical(text, &GrammarBackend, budget).unwrap();
    println!("exact backend: {path} in {} attempt(s)", record.attempts);

    let sloppy = Sloppy { inner: GrammarBackend, left_calls: Cell::new(0) };
    let (path, record) = extract_canonical(text, &sloppy, budget).unwrap();
    println!("sloppy backend: {path} in {} attempt(s)", record.attempts);
    println!("  left set {:?}, right set {:?}", record.left_turns, record.right_turns);

    let once = RetryBudget::new(1).unwrap();
    let sloppy = Sloppy { inner: GrammarBackend, left_calls: Cell::new(0) };
    match extract_canonical(text, &sloppy, once) {
        Err(ExtractionError::NoAgreement { record }) => {
            println!("with a budget of 1: no agreement");
            println!("  left saw  {:?}", record.waypoints_left);
            println!("  right saw {:?}", record.waypoints_right);
        }
        other => println!("unexpected: {other:?}"),
    }
}
