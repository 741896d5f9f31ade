//! Reverse and leave-one-out evaluation of the map pipeline on a batch of
//! generated datasets, printed as a table.
//!
//! Run with `cargo run --example evaluation [environments]`.

use topotext::envsim::{generate_environment, sample_dataset};
use topotext::evaluator::{evaluate, render_table, Method, Task};
use topotext::instruction::GrammarReader;

fn main() {
    let count: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut datasets = Vec::new();
    let mut seed = 0;
    while datasets.len() < count as usize {
        let env = generate_environment(seed, 13, 7).unwrap();
        match sample_dataset(&env, seed) {
            Ok(d) => datasets.push(d),
            Err(e) => eprintln!("seed {seed} skipped: {e}"),
        }
        seed += 1;
    }
    let method = Method::Explicit(&GrammarReader);
    let reports = [
        evaluate(&datasets, Task::Reverse, &method),
        evaluate(&datasets, Task::Combined, &method),
    ];
    print!("{}", render_table(&reports));
}
