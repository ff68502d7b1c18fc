//! Generates a seeded CVRP dataset, writes it as JSON lines and reads it back.

use redsearch::cop::{generate_instances, Dataset, GeneratorParams, Instance};

fn main() -> anyhow::Result<()> {
    let params = GeneratorParams::Cvrp { n: 20, capacity: 40.0, max_demand: 9 };
    let dataset = generate_instances(&params, 7, 16)?;
    let path = std::env::temp_dir().join("redsearch-cvrp20.jsonl");
    let digest = dataset.write(&path)?;
    println!("wrote {} instances to {}", dataset.len(), path.display());
    println!("digest {digest}");

    let back = Dataset::read(&path)?;
    assert_eq!(back.digest()?, digest);
    if let Instance::Cvrp(first) = &back.instances[0] {
        let demand: f64 = first.demands.iter().sum();
        println!("first instance: {} customers, total demand {demand}", first.demands.len() - 1);
    }

    // same seed, same bytes
    let again = generate_instances(&params, 7, 16)?;
    assert_eq!(again.digest()?, digest);
    Ok(())
}
