//! Exhaustive optima on tiny instances, and what validation reports for a
//! broken answer.

use redsearch::cop::{
    baseline_solve, brute_force_optimum, generate_instances, objective, validate, Baseline,
    GeneratorParams, Solution,
};

fn main() -> anyhow::Result<()> {
    let tsp = generate_instances(&GeneratorParams::Tsp { n: 8 }, 3, 4)?;
    for inst in &tsp.instances {
        let (tour, best) = brute_force_optimum(inst)?;
        let greedy = objective(inst, &baseline_solve(Baseline::NearestNeighbor, inst)?)?;
        println!("tsp: optimum {:.4} via {tour:?}, nearest neighbour {:.4}", -best, -greedy);
    }

    let kp = generate_instances(&GeneratorParams::Kp { n: 12, capacity: 3.0 }, 3, 4)?;
    for inst in &kp.instances {
        let (_, best) = brute_force_optimum(inst)?;
        let greedy = objective(inst, &baseline_solve(Baseline::RatioGreedy, inst)?)?;
        println!("kp: optimum {best:.4}, ratio greedy {greedy:.4}");
    }

    let report = validate(&tsp.instances[0], &Solution::Tsp(vec![0, 1, 2, 2, 4, 5, 6, 7]))?;
    println!("broken tour: {}", report.summary());
    Ok(())
}
