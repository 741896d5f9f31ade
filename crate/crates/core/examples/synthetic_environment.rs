//! Generating a ground-truth environment and sampling a ten-path dataset.
//!
//! Run with `cargo run --example synthetic_environment [seed]`.

use topotext::envsim::{environment_id, generate_environment, sample_dataset};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let env = generate_environment(seed, 14, 8).unwrap();
    println!("{} ({} places, {} corridors)", environment_id(&env), env.node_count(), env.edge_count());
    for (name, p) in env.nodes() {
        let neighbours: Vec<String> = env.neighbors(name).map(|n| n.to_string()).collect();
        println!("  {name:<12} ({:>6.3}, {:>6.3})  -> {}", p.x, p.y, neighbours.join(", "));
    }
    let designated: Vec<String> = env.designated().iter().map(|n| n.to_string()).collect();
    println!("designated: {}", designated.join(", "));

    let dataset = sample_dataset(&env, seed).unwrap();
    println!("\ndataset:");
    for (i, item) in dataset.items.iter().enumerate() {
        println!("{i:>2}. {}", item.instruction);
    }
}
