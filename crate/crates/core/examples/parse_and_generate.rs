//! Reading instructions into canonical paths and writing them back out.
//!
//! Run with `cargo run --example parse_and_generate`.

use topotext::instruction::{generate_instruction, parse_instruction};

fn main() {
    let inputs = [
        "Depart from n1 to n2. Then, turn right and proceed to n3.",
        "Start from the kitchen and go to the hallway. Then turn left there and walk to the \"Living room\". Then, go straight to Deck.",
        "Depart from Lobby to Stairs. Then, turn around and proceed to Lobby.",
    ];
    for text in inputs {
        let path = parse_instruction(text).unwrap();
        println!("input:     {text}");
        println!("canonical: {}", path.to_json());
        println!("rendered:  {}", generate_instruction(&path).unwrap());
        let back = path.reverse().unwrap();
        println!("reversed:  {}\n", generate_instruction(&back).unwrap());
    }

    for bad in ["Go to n2.", "Depart from n1 to n2. Then, turn right and", "Depart from \"n1 to n2."] {
        println!("{bad:?}\n  -> {}", parse_instruction(bad).unwrap_err());
    }
}
