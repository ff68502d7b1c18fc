//! Loads a TSPLIB file and scores the nearest-neighbour tour against a known
//! optimum.
//!
//! cargo run --example tsplib_eval -- path/to/file.tsp 426

use redsearch::cop::{baseline_solve, objective, optimality_gap, parse_tsplib, validate, Baseline, Sense};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/eil51.tsp").to_string());
    let optimum: f64 = args.next().map_or(Ok(426.0), |s| s.parse())?;

    let instance = parse_tsplib(&std::fs::read_to_string(&path)?)?;
    let tour = baseline_solve(Baseline::NearestNeighbor, &instance)?;
    anyhow::ensure!(validate(&instance, &tour)?.valid, "baseline tour is invalid");
    let length = -objective(&instance, &tour)?;
    let gap = optimality_gap(length, optimum, Sense::Minimize)?;
    println!("{path}: {} nodes, nearest neighbour {length}, gap {gap:.2}%", instance.size());
    Ok(())
}
