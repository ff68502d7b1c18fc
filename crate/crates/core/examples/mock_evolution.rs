//! A complete search on KP driven by the scripted model and the in-process
//! sandbox. No network and no Python needed.

use redsearch::cop::{generate_instances, CopKind, GeneratorParams};
use redsearch::evolution::{run_evolution, EvolutionConfig};
use redsearch::llm::ChatParams;
use redsearch::sandbox::FixtureSandbox;
use redsearch::scripted::scripted_client;

fn main() -> anyhow::Result<()> {
    let data = generate_instances(&GeneratorParams::Kp { n: 30, capacity: 7.5 }, 1, 8)?;
    let mut cfg = EvolutionConfig::for_kind(CopKind::Kp);
    cfg.population_size = 6;
    cfg.generations = 6;
    cfg.seed = 42;
    let llm = scripted_client(CopKind::Kp, ChatParams { model: "scripted".into(), temperature: 1.0 });
    let result = run_evolution(cfg, &llm, &FixtureSandbox::new(), &data)?;

    for g in &result.generations {
        let rations: Vec<String> = g.rations.iter().map(|r| format!("{:?}", r.plan.counts)).collect();
        println!(
            "gen {:>2}: best {:?}, population {}, rations {}",
            g.generation,
            g.best_fitness,
            g.population_size,
            rations.join(" ")
        );
    }
    for r in &result.reductions {
        println!("reduction {}: {:?}", r.id, r.status);
    }
    println!("best heuristic from reduction {}: {:.4}", result.best.lr_id, result.best.fitness);
    println!("{} model calls", result.llm_calls);
    Ok(())
}
