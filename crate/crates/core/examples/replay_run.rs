//! Records a run's model traffic and replays it to the same result.

use redsearch::cop::{generate_instances, CopKind, GeneratorParams};
use redsearch::evolution::{run_evolution, EvolutionConfig};
use redsearch::llm::{ChatParams, LlmClient, ReplayMode};
use redsearch::sandbox::FixtureSandbox;
use redsearch::scripted::scripted_client;

fn main() -> anyhow::Result<()> {
    let data = generate_instances(&GeneratorParams::Tsp { n: 12 }, 5, 4)?;
    let mut cfg = EvolutionConfig::for_kind(CopKind::Tsp);
    cfg.population_size = 4;
    cfg.generations = 3;
    let params = ChatParams { model: "scripted".into(), temperature: 1.0 };

    let recorder = scripted_client(CopKind::Tsp, params.clone()).recording(None)?;
    let first = run_evolution(cfg.clone(), &recorder, &FixtureSandbox::new(), &data)?;
    let transcript = recorder.recorded().expect("recording was enabled");
    println!("recorded {} exchanges", transcript.entries.len());

    let replayer = LlmClient::replay(params, transcript, ReplayMode::Sequential)?;
    let second = run_evolution(cfg, &replayer, &FixtureSandbox::new(), &data)?;
    println!("first  {}", first.digest()?);
    println!("replay {}", second.digest()?);
    anyhow::ensure!(first.digest()? == second.digest()?, "replay diverged");
    Ok(())
}
