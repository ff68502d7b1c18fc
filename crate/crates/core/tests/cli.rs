//! The command line, driven in-process.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use redsearch::cli::run_cli;
use redsearch::cop::{Dataset, DatasetMetadata, Instance, TspInstance};
use redsearch::evolution::RunResult;
use redsearch::sandbox::FixtureSandbox;
use serde_json::{json, Value};
use tempfile::TempDir;

fn cli(args: &[&str]) -> anyhow::Result<ExitCode> {
    run_cli(std::iter::once("redsearch").chain(args.iter().copied()))
}

fn ok(args: &[&str]) {
    let code = cli(args).unwrap_or_else(|e| panic!("{args:?}: {e:#}"));
    assert_eq!(code, ExitCode::SUCCESS, "{args:?}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn kp_dataset(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("kp.jsonl");
    ok(&["gen-data", "--kind", "kp", "--n", "20", "--capacity", "25", "--seed", "5", "--count", "4", "--out", p(&path)]);
    path
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!(
            "dataset = \"kp.jsonl\"\n\n[evolution]\npopulation_size = 4\nactive_reductions = 2\ncandidate_reductions = 2\ngenerations = 1\nworkers = 2\n{extra}"
        ),
    )
    .unwrap();
    path
}

#[test]
fn gen_data_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        ok(&["gen-data", "--kind", "cvrp", "--n", "10", "--capacity", "50", "--seed", "3", "--count", "5", "--out", p(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(Dataset::read(&a).unwrap().len(), 5);
    // existing files are kept unless forced
    assert!(cli(&["gen-data", "--kind", "tsp", "--n", "5", "--count", "1", "--out", p(&a)]).is_err());
    ok(&["gen-data", "--kind", "tsp", "--n", "5", "--count", "1", "--out", p(&a), "--force"]);
}

#[test]
fn gen_data_rejects_bad_requests() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.jsonl");
    assert!(cli(&["gen-data", "--kind", "tsp", "--n", "5", "--count", "0", "--out", p(&out)]).is_err());
    assert!(cli(&["gen-data", "--kind", "kp", "--n", "5", "--count", "2", "--out", p(&out)]).is_err());
    assert!(cli(&["gen-data", "--kind", "bpp", "--n", "5", "--capacity", "100", "--sizes", "gauss:1:2", "--count", "2", "--out", p(&out)]).is_err());
    assert!(cli(&["gen-data", "--kind", "pizza", "--n", "5", "--count", "2", "--out", p(&out)]).is_err());
    assert!(!out.exists());
}

#[test]
fn mock_run_writes_its_outputs_and_replays() {
    let dir = TempDir::new().unwrap();
    kp_dataset(dir.path());
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    ok(&["run", "--config", p(&config), "--out", p(&out), "--seed", "9"]);
    for f in ["result.json", "best_heuristic.json", "checkpoint.json", "transcript.jsonl", "reductions"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let result: RunResult = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result.generations.len(), 2);
    assert_eq!(result.config.seed, 9);

    // a non-empty output folder is not overwritten silently
    assert!(cli(&["run", "--config", p(&config), "--out", p(&out), "--seed", "9"]).is_err());
    assert!(out.join("result.json").exists());

    let again = dir.path().join("replayed");
    ok(&[
        "replay",
        "--config",
        p(&config),
        "--transcript",
        p(&out.join("transcript.jsonl")),
        "--out",
        p(&again),
        "--seed",
        "9",
        "--expect",
        p(&out.join("result.json")),
    ]);
}

#[test]
fn repeated_runs_use_consecutive_seeds() {
    let dir = TempDir::new().unwrap();
    kp_dataset(dir.path());
    let config = write_config(dir.path(), "");
    let out = dir.path().join("many");
    ok(&["run", "--config", p(&config), "--out", p(&out), "--seed", "4", "--repeat", "2"]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = summary["runs"].as_array().unwrap().iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![4, 5]);
    assert!(out.join("run-2/result.json").exists());
}

#[test]
fn invalid_settings_fail_before_writing() {
    let dir = TempDir::new().unwrap();
    kp_dataset(dir.path());
    let config = dir.path().join("bad.toml");
    fs::write(&config, "dataset = \"kp.jsonl\"\n[evolution]\nactive_reductions = 3\ncandidate_reductions = 2\n").unwrap();
    let out = dir.path().join("out");
    let err = cli(&["run", "--config", p(&config), "--out", p(&out)]).unwrap_err();
    assert!(format!("{err:#}").contains("candidate_reductions"), "{err:#}");
    assert!(!out.exists());

    let config = write_config(dir.path(), "\n[llm]\nbackend = \"live\"\nendpoint = \"http://127.0.0.1:9/\"\napi_key_env = \"REDSEARCH_CLI_TEST_NO_KEY\"\n");
    let err = cli(&["run", "--config", p(&config), "--out", p(&out)]).unwrap_err();
    assert!(format!("{err:#}").contains("REDSEARCH_CLI_TEST_NO_KEY"), "{err:#}");
    assert!(!out.exists());

    let err = cli(&["run", "--config", p(&config), "--out", p(&out), "--backend", "replay"]).unwrap_err();
    assert!(format!("{err:#}").contains("transcript"), "{err:#}");
}

fn triangle_bundle(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let inst = Instance::Tsp(TspInstance::from_coords(vec![[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]));
    let dataset = dir.join("tri.jsonl");
    Dataset::new(vec![inst; 2], DatasetMetadata::default()).unwrap().write(&dataset).unwrap();
    let reduction = format!(
        "def convert_input_A_to_B(coords, distances):\n    {}\n    return (coords, distances)\n\ndef convert_solution_B_to_A(solution_B):\n    return solution_B",
        FixtureSandbox::marker("identity", None)
    );
    let heuristic = format!(
        "def solve_B(input_B):\n    {}\n    raise NotImplementedError",
        FixtureSandbox::marker("nearest_neighbor", Some("0"))
    );
    let bundle = json!({
        "cop_kind": "tsp",
        "heuristic_id": 0,
        "lr_id": 0,
        "generation": 0,
        "fitness": -12.0,
        "description": "nearest neighbour",
        "heuristic_code": heuristic,
        "problem_b": "Problem B visits every point once.",
        "reduction_code": reduction,
        "code_template": "def solve_B(input_B):\n    return solution_B",
    });
    let path = dir.join("bundle.json");
    fs::write(&path, serde_json::to_string_pretty(&bundle).unwrap()).unwrap();
    (path, dataset)
}

#[test]
fn eval_reports_objectives_and_gaps() {
    let dir = TempDir::new().unwrap();
    let (bundle, dataset) = triangle_bundle(dir.path());
    let report = dir.path().join("report.json");
    ok(&["eval", "--bundle", p(&bundle), "--dataset", p(&dataset), "--json", p(&report)]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["valid"], 2);
    assert!((doc["mean_objective"].as_f64().unwrap() + 12.0).abs() < 1e-9);

    // a heuristic whose answers fail validation makes the command fail
    let mut broken: Value = serde_json::from_str(&fs::read_to_string(&bundle).unwrap()).unwrap();
    broken["heuristic_code"] = json!(format!(
        "def solve_B(input_B):\n    {}\n    return 0",
        FixtureSandbox::marker("raise", None)
    ));
    fs::write(&bundle, broken.to_string()).unwrap();
    assert_eq!(cli(&["eval", "--bundle", p(&bundle), "--dataset", p(&dataset)]).unwrap(), ExitCode::FAILURE);

    fs::write(&bundle, "{\"cop_kind\": \"tsp\"").unwrap();
    assert!(cli(&["eval", "--bundle", p(&bundle), "--dataset", p(&dataset)]).is_err());
}

#[test]
fn eval_refuses_a_kind_mismatch() {
    let dir = TempDir::new().unwrap();
    let (bundle, _) = triangle_bundle(dir.path());
    let kp = kp_dataset(dir.path());
    let err = cli(&["eval", "--bundle", p(&bundle), "--dataset", p(&kp)]).unwrap_err();
    assert!(err.to_string().contains("tsp"), "{err}");
}

#[test]
fn baselines_write_a_report() {
    let dir = TempDir::new().unwrap();
    let (_, dataset) = triangle_bundle(dir.path());
    let report = dir.path().join("baselines.json");
    ok(&["baselines", "--dataset", p(&dataset), "--json", p(&report)]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert!((r["mean_magnitude"].as_f64().unwrap() - 12.0).abs() < 1e-9, "{r}");
    }
}
