//! Building a map from two instructions, inferring unstated actions and
//! answering a route query that no single instruction covers.
//!
//! Run with `cargo run --example toy_map`.

use topotext::canonical::NodeName;
use topotext::instruction::{generate_instruction, parse_instruction};
use topotext::router::{find_route, RouteQuery};
use topotext::topo_map::{MapError, TopoMap};

fn main() {
    let mut map = TopoMap::new();
    for text in [
        "Depart from n1 to n2. Then, turn right and proceed to n3.",
        "Depart from n1 to n2. Then, proceed to n4. Then, turn left and proceed to n5.",
    ] {
        map.add_path(&parse_instruction(text).unwrap()).unwrap();
    }
    println!("{} nodes, {} edges, {} stored actions", map.node_count(), map.edge_count(), map.stored_action_count());

    println!("\nevery action the map determines:");
    for ((p, a, n), action) in map.inferable_actions() {
        let marker = if map.stored_action(&p, &a, &n).is_some() { "stored" } else { "inferred" };
        println!("  {p} -> {a} -> {n}: {action} ({marker})");
    }

    let name = |s: &str| NodeName::new(s).unwrap();
    let query = RouteQuery::new(name("n5"), name("n3")).unwrap();
    let route = find_route(&map, &query).unwrap();
    println!("\nn5 to n3: {route}");
    println!("{}", generate_instruction(&route).unwrap());

    let contradiction = parse_instruction("Depart from n3 to n2. Then, turn right and proceed to n1.").unwrap();
    match map.add_path(&contradiction) {
        Err(MapError::Conflict(c)) => println!("\nrejected: {c}"),
        other => println!("\nunexpected: {other:?}"),
    }
    println!("map unchanged: {} stored actions", map.stored_action_count());

    print!("\n{}", map.to_json());
}
