//! Handcrafted baselines on freshly generated TSP, KP and online packing sets.

use redsearch::cop::{
    baseline_solve, bin_lower_bound, generate_instances, mean_objective, objective,
    optimality_gap, Baseline, GeneratorParams, Instance, Sense, SizeDistribution,
};

fn report(params: GeneratorParams, seed: u64) -> anyhow::Result<()> {
    let dataset = generate_instances(&params, seed, 64)?;
    for baseline in Baseline::for_kind(dataset.kind) {
        let solutions = dataset
            .instances
            .iter()
            .map(|i| baseline_solve(baseline, i))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = mean_objective(dataset.instances.iter().zip(&solutions))?;
        println!("{:>5} {baseline:?}: mean objective {mean:.3}", dataset.kind);
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    report(GeneratorParams::Tsp { n: 50 }, 1)?;
    report(GeneratorParams::Kp { n: 50, capacity: 12.5 }, 1)?;

    // packing is usually reported as a gap against the volume bound
    let sizes = SizeDistribution::UniformInt { min: 20, max: 100 };
    let stream = generate_instances(&GeneratorParams::Obpp { n: 500, capacity: 150.0, sizes }, 1, 8)?;
    for baseline in [Baseline::BestFit, Baseline::FirstFit] {
        let mut total = 0.0;
        for inst in &stream.instances {
            let Instance::Obpp(o) = inst else { unreachable!() };
            let bins = -objective(inst, &baseline_solve(baseline, inst)?)?;
            total += optimality_gap(bins, bin_lower_bound(&o.item_stream, o.bin_capacity), Sense::Minimize)?;
        }
        println!(" obpp {baseline:?}: mean gap {:.2}%", total / stream.len() as f64);
    }
    Ok(())
}
