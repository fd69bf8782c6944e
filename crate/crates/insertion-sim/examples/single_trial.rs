//! Runs one insertion trial and prints a condensed trace.
//!
//! Usage: cargo run --release --example single_trial -- [dx dy dyaw] [locks]
//! where `locks` is a four-character string like `..x.` (x y z yaw order,
//! any non-dot locks the axis). Defaults to the square-peg task at
//! offsets (+4, +4, +8 deg) with every axis free.

use insertion_sim::harness::Scenario;
use insertion_sim::simulator::{run_trial, TrialSpec};
use insertion_sim::{Calibration, Catalog};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let offsets = if args.len() >= 3 {
        [
            args[0].parse().expect("dx"),
            args[1].parse().expect("dy"),
            args[2].parse().expect("dyaw"),
        ]
    } else {
        [4.0, 4.0, 8.0]
    };
    let locks = if args.len() >= 4 {
        let mut l = [false; 4];
        for (i, ch) in args[3].chars().take(4).enumerate() {
            l[i] = ch != '.';
        }
        l
    } else {
        [false; 4]
    };

    let cal = Calibration::shipped();
    let catalog = Catalog::shipped();
    let preset = Scenario::Square.preset().unwrap();
    let spec = TrialSpec {
        object: preset.object,
        site: preset.site,
        offsets,
        axis_locks: locks,
        spiral: preset.spiral,
        press: preset.press,
        orientation: preset.orientation,
        seed: 0,
        jitter: [0.0, 0.0],
        steps: 2000,
    };

    let outcome = run_trial(&cal, &catalog, &spec).expect("valid spec");
    println!(
        "status: {:?}   success_time: {:?}   max force: {:.2} N   steps: {}",
        outcome.status,
        outcome.success_time,
        outcome.max_force,
        outcome.trace.len()
    );
    println!(
        "{:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9} {:>4} {:>7}",
        "t", "hand_x", "hand_y", "hand_z", "obj_x", "obj_y", "obj_z", "obj_yaw", "fz", "nc", "maxpen"
    );
    for (i, r) in outcome.trace.records.iter().enumerate() {
        if i % 50 == 0 || i + 1 == outcome.trace.len() {
            println!(
                "{:>8.4} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>9.3} {:>4} {:>7.4}",
                r.t,
                r.hand.x,
                r.hand.y,
                r.hand.z,
                r.object.x,
                r.object.y,
                r.object.z,
                r.object.yaw,
                r.net.fz,
                r.contacts,
                r.max_penetration,
            );
        }
    }
}
