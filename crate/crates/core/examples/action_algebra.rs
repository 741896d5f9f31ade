//! Quantizing turn angles and composing the resulting actions.
//!
//! Run with `cargo run --example action_algebra`.

use std::f64::consts::PI;

use topotext::action::{Action, AngleThreshold};

fn main() {
    let theta = AngleThreshold::default();
    println!("threshold: {:.4} rad", theta.radians());
    for degrees in [0.0, 30.0, 60.0, 90.0, 135.0, 180.0, -45.1, -100.0] {
        let a = Action::from_angle(degrees * PI / 180.0, theta).unwrap();
        println!("{degrees:>7.1} deg -> {a}");
    }

    println!("\ncompose (row then column):");
    print!("   ");
    for b in Action::ALL {
        print!(" {b}");
    }
    println!();
    for a in Action::ALL {
        print!("  {a}");
        for b in Action::ALL {
            print!(" {}", a.compose(b));
        }
        println!();
    }
    println!("\ninverses:");
    for a in Action::ALL {
        println!("  {a}^-1 = {}", a.inverse());
    }

    let narrow = AngleThreshold::new(PI / 8.0).unwrap();
    let a = Action::from_angle(PI / 6.0, narrow).unwrap();
    println!("\n30 deg with a pi/8 threshold is {a}");
}
